//! The reduced bracket on J⁻¹(μ)/G_μ against brackets of invariant
//! extensions, and the quotient algebroid it lives over.

use algred::config::Settings;
use algred::fixtures;
use algred::reduce::{check_reduced_bracket, level_invariants, QuotientModel, Setting};

fn main() {
    let s = Settings::default();
    for name in ["fix-tm2-translation", "fix-so3"] {
        let f = fixtures::load(name).unwrap();
        let set = Setting::from_fixture(&f).unwrap();
        let quo = QuotientModel::new(&set.parent_action, f.trivialization.as_ref().unwrap()).unwrap();
        let mu = f.mu.clone().unwrap();
        println!("{name}: quotient rank {} over {:?}", quo.model().rank(), quo.model().coords());
        for inv in level_invariants(&set, &mu).unwrap() {
            println!("  level-set invariant {inv}");
        }
        let pts = set.level_points(&mu, 30, &s).unwrap();
        for r in check_reduced_bracket(&set, &quo, &mu, &pts, &s).unwrap() {
            println!("{r}");
        }
    }
}
