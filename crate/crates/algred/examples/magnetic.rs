//! Cotangent-bundle reduction with a curved connection: the zero level, the
//! magnetic term B and the shifted level, then the isotropy embedding on
//! rotations.

use algred::config::Settings;
use algred::fixtures;
use algred::reduce::{check_general_embedding, check_mu_zero, check_shifted, MagneticTerm, QuotientModel, Setting};

fn main() {
    let s = Settings::default();
    let f = fixtures::load("fix-mag").unwrap();
    let set = Setting::from_fixture(&f).unwrap();
    let quo = QuotientModel::new(&set.parent_action, f.trivialization.as_ref().unwrap()).unwrap();

    let zero = set.level_points(&[0.0], 30, &s).unwrap();
    for r in check_mu_zero(&set, &quo, &zero, &s).unwrap() {
        println!("{r}");
    }

    let mu = f.mu.clone().unwrap();
    let conn = f.connection.as_ref().unwrap();
    let mag = MagneticTerm::new(&set.parent_action, &quo, conn, &mu).unwrap();
    for (idx, e) in mag.alpha.components() {
        println!("α_μ(e{}) = {e}", idx[0] + 1);
    }
    println!("B at q = (0.3, -0.2):\n{}", mag.b_at(&[0.3, -0.2]).unwrap());
    let pts = set.level_points(&mu, 30, &s).unwrap();
    for r in check_shifted(&set, &quo, &mag, &mu, &pts, &s).unwrap() {
        println!("{r}");
    }

    let f = fixtures::load("fix-so3-act").unwrap();
    let set = Setting::from_fixture(&f).unwrap();
    let mu = [0.0, 0.0, 1.0];
    let pts = set.level_points(&mu, 30, &s).unwrap();
    for r in check_general_embedding(&set, &mu, &pts, &s).unwrap() {
        println!("{r}");
    }
}
