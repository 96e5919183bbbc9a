//! Momentum map of rotations acting on T*R³: values, equivariance and the
//! level-set subspace identities.

use algred::config::Settings;
use algred::fixtures;
use algred::reduce::Setting;

fn main() {
    let s = Settings::default();
    let f = fixtures::load("fix-so3-act").unwrap();
    let set = Setting::from_fixture(&f).unwrap();
    for (a, c) in set.momentum.comps().iter().enumerate() {
        println!("J_{} = {c}", a + 1);
    }
    let mu = [0.0, 0.0, 1.0];
    let pts = set.level_points(&mu, 30, &s).unwrap();
    println!("J at a sampled level point: {:?}", set.momentum.value(&pts[0]).unwrap());

    for r in set.momentum.check_hamiltonian_action(&set.omega, &s).unwrap() {
        println!("{r}");
    }
    println!("{}", set.momentum.check_jt_equivariance(&s, 30).unwrap());
    for r in set.momentum.check_level_set_lemmas(&set.omega, &mu, &pts, &s).unwrap() {
        println!("{r}");
    }
}
