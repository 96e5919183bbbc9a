//! The prolongation of so(3) over its dual: canonical form, Poisson cover,
//! and the form at the north pole.

use algred::config::Settings;
use algred::fixtures;
use algred::lifts::dual_chart;
use algred::prolong::build_prolongation_named;

fn main() {
    let s = Settings::default();
    let f = fixtures::load("fix-so3").unwrap();
    let parent = f.model.validated().unwrap();
    let (_, y) = dual_chart(&parent);
    let p = build_prolongation_named(&parent, y, f.fiber_box).unwrap();
    println!("labels {:?} over {:?}", p.model().labels(), p.model().coords());

    let omega = p.omega().unwrap();
    println!("Ω at y = (0, 0, 1):\n{}", omega.matrix_at(&[0.0, 0.0, 1.0]).unwrap());

    for r in p.check(None, &s).unwrap() {
        println!("{r}");
    }
    println!("{}", p.check_poisson_cover(&s).unwrap());
    println!("{}", p.check_lie_algebra_cover(&s, 20).unwrap());
}
