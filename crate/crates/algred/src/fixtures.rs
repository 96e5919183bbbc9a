//! Built-in fixtures, embedded from the `fixtures/` data files.

use crate::model::{Fixture, ModelError};

const FILES: &[(&str, &str)] = &[
    ("fix-tm2", include_str!("../fixtures/fix-tm2.toml")),
    ("fix-so3", include_str!("../fixtures/fix-so3.toml")),
    ("fix-tm2-translation", include_str!("../fixtures/fix-tm2-translation.toml")),
    ("fix-act", include_str!("../fixtures/fix-act.toml")),
    ("fix-mag", include_str!("../fixtures/fix-mag.toml")),
    ("fix-so3-act", include_str!("../fixtures/fix-so3-act.toml")),
    ("broken", include_str!("../fixtures/broken.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    FILES.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<Fixture, ModelError> {
    let text = source(name).ok_or_else(|| ModelError::UnknownFixture(name.to_string()))?;
    Fixture::from_str(text, name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Settings;

    #[test]
    fn every_fixture_loads() {
        for n in names() {
            let f = load(n).unwrap_or_else(|e| panic!("{n}: {e}"));
            assert_eq!(f.name, n);
        }
        assert!(matches!(load("nope"), Err(ModelError::UnknownFixture(_))));
    }

    #[test]
    fn actions_are_valid_anti_morphisms() {
        let s = Settings::default();
        for n in ["fix-so3", "fix-tm2-translation", "fix-act", "fix-mag", "fix-so3-act"] {
            let f = load(n).unwrap();
            let act = f.action.clone().unwrap().validated().unwrap_or_else(|e| panic!("{n}: {e}"));
            let recs = act.check_invariants(&s).unwrap();
            assert!(recs.iter().all(|r| r.pass), "{n}: {recs:?}");
        }
    }

    #[test]
    fn broken_fixture_is_not_antisymmetric() {
        let f = load("broken").unwrap();
        assert!(f.model.clone().validated().is_err());
    }
}
