//! Pointwise reduction K/G_μ on the rigid body: the reduced fiber at μ = (0, 0, 1)
//! is the tangent plane of a coadjoint sphere.

use algred::config::Settings;
use algred::fixtures;
use algred::reduce::Setting;

fn main() {
    let s = Settings::default();
    let f = fixtures::load("fix-so3").unwrap();
    let set = Setting::from_fixture(&f).unwrap();
    let mu = [0.0, 0.0, 1.0];
    let pts = set.level_points(&mu, 30, &s).unwrap();
    let rf = set.reduce_fiber(&mu, &pts[0], &s).unwrap();
    println!("at {:?}: dim K = {}, dim G_μ = {}, reduced dimension {}", rf.point, rf.k.ncols(), rf.g.ncols(), rf.dim());
    println!("reduced form:\n{}", rf.omega);
    for r in set.check_fibers(&mu, &pts, &s).unwrap() {
        println!("{r}");
    }
}
