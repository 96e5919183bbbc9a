//! Algebroid axioms on every built-in fixture, including the deliberately
//! broken one.

use algred::config::Settings;
use algred::fixtures;

fn main() {
    let s = Settings::default();
    for name in fixtures::names() {
        let f = fixtures::load(name).expect("built-in fixture");
        let recs = f.model.check_axioms(&s);
        let failed: Vec<_> = recs.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect();
        if failed.is_empty() {
            println!("{name:<22} all {} identities hold", recs.len());
        } else {
            println!("{name:<22} fails {}", failed.join(", "));
        }
    }
}
