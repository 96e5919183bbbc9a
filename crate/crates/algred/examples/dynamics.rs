//! A charge in a unit magnetic field, obtained by reducing free motion on
//! R³ with a twisted metric; prints the projected and reduced trajectories.

use algred::config::Settings;
use algred::fixtures;
use algred::reduce::{check_dynamics, Setting};

fn main() {
    let s = Settings::default();
    let f = fixtures::load("fix-mag").unwrap();
    let set = Setting::from_fixture(&f).unwrap();
    let (recs, traj) = check_dynamics(&f, &set, &s).unwrap();
    for r in &recs {
        println!("{r}");
    }
    let (projected, reduced) = traj.expect("fixture is reducible");
    println!("{:>6} {:>28} {:>28}", "t", "projected (q1, q2)", "reduced (q1, q2)");
    for i in (0..projected.times.len()).step_by(50) {
        let (p, r) = (&projected.states[i], &reduced.states[i]);
        println!("{:>6.2} {:>13.6} {:>13.6}  {:>13.6} {:>13.6}", projected.times[i], p[0], p[1], r[0], r[1]);
    }
}
