//! TOML model files: one file describes one fixture.
//!
//! ```toml
//! [fixture-meta]
//! name = "fix-tm2-translation"
//! box = [[-2, 2], [-2, 2]]
//! mu = [0]
//!
//! [algebroid]
//! coords = ["x1", "x2"]
//! rank = 2
//! rho = [["1", "0"], ["0", "1"]]
//! C = [{ i = 1, j = 2, k = 1, expr = "x2" }]
//!
//! [algebra]
//! dim = 1
//!
//! [action]
//! psi = [["1", "0"]]
//! ```
//!
//! Indices are 1-based. Unlisted structure functions are zero and the mirror
//! entry C_ji^k = −C_ij^k is implied unless listed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebroid::{AlgebroidError, AlgebroidModel};
use crate::hamiltonian::{HamError, SymplecticSection};
use crate::liegroup::{LieAlgebra, LieError};
use crate::lifts::{dual_chart, fresh_names, LiftAction, LiftError};
use crate::symexpr::{parse, Expr, Role, VarEnv};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid model file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("in {at}: {msg}")]
    Expr { at: String, msg: String },
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Ham(#[from] HamError),
    #[error("unknown fixture `{0}`; see list-fixtures")]
    UnknownFixture(String),
    #[error("fixture `{name}` has no [{section}] section")]
    Missing { name: String, section: &'static str },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFile {
    #[serde(rename = "fixture-meta", default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<RawMeta>,
    pub algebroid: RawAlgebroid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<RawAlgebra>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<RawAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<RawOmega>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<RawMomentum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<RawConnection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trivialization: Option<RawTrivialization>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RawMeta {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_box: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conserved: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAlgebroid {
    pub coords: Vec<String>,
    pub rank: usize,
    pub rho: Vec<Vec<String>>,
    #[serde(rename = "C", default, skip_serializing_if = "Vec::is_empty")]
    pub c: Vec<RawStructure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStructure {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub expr: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAlgebra {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c: Vec<RawAlgebraEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAlgebraEntry {
    pub a: usize,
    pub b: usize,
    pub e: usize,
    pub expr: String,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAction {
    pub psi: Vec<Vec<String>>,
    #[serde(rename = "xi_M", default, skip_serializing_if = "Option::is_none")]
    pub xi_m: Option<Vec<Vec<String>>>,
    #[serde(default = "yes")]
    pub free: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOmega {
    pub omega: Vec<RawOmegaEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOmegaEntry {
    pub i: usize,
    pub j: usize,
    pub expr: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMomentum {
    #[serde(rename = "J")]
    pub j: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConnection {
    #[serde(rename = "A")]
    pub a: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RawTrivialization {
    /// Invariant functions on M serving as coordinates q1.. on M/G.
    pub reduced: Vec<String>,
    /// A point s(q) of M over each reduced point, in terms of q1..
    pub section: Vec<String>,
    /// Invariant sections of A spanning a complement of ψ(g).
    pub frame: Vec<Vec<String>>,
    /// Fiber slots of the g factor when A = g × TM.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_slots: Option<Vec<usize>>,
    /// Invariant vector fields on M framing TM/G, used with `g-slots`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant_frame: Option<Vec<Vec<String>>>,
}

/// Trivialization data in parsed form (0-based slots).
#[derive(Clone, Debug)]
pub struct Trivialization {
    pub reduced_names: Vec<String>,
    pub reduced: Vec<Expr>,
    pub section: Vec<Expr>,
    pub frame: Vec<Vec<Expr>>,
    pub g_slots: Option<Vec<usize>>,
    pub invariant_frame: Option<Vec<Vec<Expr>>>,
}

/// A parsed model file.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub description: String,
    /// Structure data as written; not checked for antisymmetry.
    pub model: AlgebroidModel,
    pub algebra: Option<LieAlgebra>,
    pub action: Option<LiftAction>,
    pub omega: Option<SymplecticSection>,
    pub momentum: Option<Vec<Expr>>,
    pub connection: Option<Vec<Vec<Expr>>>,
    pub trivialization: Option<Trivialization>,
    pub mu: Option<Vec<f64>>,
    pub fiber_box: (f64, f64),
    /// Hamiltonian and conserved quantities over the phase-space chart.
    pub hamiltonian: Option<Expr>,
    pub conserved: Vec<Expr>,
    pub raw: RawFile,
}

fn parse_in(text: &str, env: &VarEnv, at: impl Fn() -> String) -> Result<Expr, ModelError> {
    parse(text, env).map_err(|e| ModelError::Expr { at: at(), msg: e.to_string() })
}

fn parse_rows(rows: &[Vec<String>], width: usize, env: &VarEnv, what: &str) -> Result<Vec<Vec<Expr>>, ModelError> {
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            if row.len() != width {
                return Err(ModelError::Shape(format!("{what} row {} has {} entries, expected {width}", r + 1, row.len())));
            }
            row.iter().enumerate().map(|(c, t)| parse_in(t, env, || format!("{what}[{}][{}]", r + 1, c + 1))).collect()
        })
        .collect()
}

fn index(i: usize, n: usize, what: &str) -> Result<usize, ModelError> {
    if i == 0 || i > n {
        return Err(ModelError::Shape(format!("{what} index {i} outside 1..={n}")));
    }
    Ok(i - 1)
}

impl Fixture {
    pub fn load(path: &Path) -> Result<Fixture, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io { path: path.display().to_string(), source: e })?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Fixture::from_str(&text, &stem)
    }

    pub fn from_str(text: &str, default_name: &str) -> Result<Fixture, ModelError> {
        let raw: RawFile = toml::from_str(text)?;
        Fixture::from_raw(raw, default_name)
    }

    pub fn from_raw(raw: RawFile, default_name: &str) -> Result<Fixture, ModelError> {
        let alg = &raw.algebroid;
        let (m, n) = (alg.coords.len(), alg.rank);
        let env = VarEnv::with(&alg.coords, Role::Base).map_err(ModelError::Shape)?;
        if alg.rho.len() != n {
            return Err(ModelError::Shape(format!("rho has {} rows, rank is {n}", alg.rho.len())));
        }
        let rho = parse_rows(&alg.rho, m, &env, "rho")?;
        let mut entries = Vec::new();
        for s in &alg.c {
            let (i, j, k) = (index(s.i, n, "C")?, index(s.j, n, "C")?, index(s.k, n, "C")?);
            entries.push((i, j, k, parse_in(&s.expr, &env, || format!("C[{},{},{}]", s.i, s.j, s.k))?));
        }
        let mut model = AlgebroidModel::from_sparse(alg.coords.clone(), n, rho, &entries)?;
        let meta = raw.meta.clone().unwrap_or_default();
        if let Some(bx) = &meta.sample_box {
            model.set_sample_box(bx.iter().map(|b| (b[0], b[1])).collect())?;
        }
        let fiber_box = meta.fiber_box.map_or((-2.0, 2.0), |b| (b[0], b[1]));
        if fiber_box.0 >= fiber_box.1 {
            return Err(ModelError::Shape("fiber-box needs lo < hi".into()));
        }

        let algebra = match &raw.algebra {
            None => None,
            Some(a) => {
                let genv = VarEnv::new();
                let mut es = Vec::new();
                for e in &a.c {
                    let (i, j, k) = (index(e.a, a.dim, "algebra c")?, index(e.b, a.dim, "algebra c")?, index(e.e, a.dim, "algebra c")?);
                    es.push((i, j, k, parse_in(&e.expr, &genv, || format!("algebra c[{},{},{}]", e.a, e.b, e.e))?));
                }
                Some(LieAlgebra::from_sparse(a.dim, &es)?)
            }
        };

        let action = match (&raw.action, &algebra) {
            (None, _) => None,
            (Some(_), None) => return Err(ModelError::Shape("[action] requires [algebra]".into())),
            (Some(act), Some(g)) => {
                if act.psi.len() != g.dim() {
                    return Err(ModelError::Shape(format!("psi has {} rows, algebra dimension is {}", act.psi.len(), g.dim())));
                }
                let psi = parse_rows(&act.psi, n, &env, "psi")?;
                let xi = act.xi_m.as_ref().map(|r| parse_rows(r, m, &env, "xi_M")).transpose()?;
                Some(LiftAction::new(g.clone(), model.clone(), psi, xi, act.free)?)
            }
        };

        let omega = match &raw.omega {
            None => None,
            Some(w) => {
                let mut es = Vec::new();
                for e in &w.omega {
                    let (i, j) = (index(e.i, n, "omega")?, index(e.j, n, "omega")?);
                    es.push((i, j, parse_in(&e.expr, &env, || format!("omega[{},{}]", e.i, e.j))?));
                }
                Some(SymplecticSection::from_sparse(model.clone(), &es)?)
            }
        };

        let momentum = match &raw.momentum {
            None => None,
            Some(j) => {
                let d = algebra.as_ref().map_or(0, |g| g.dim());
                if j.j.len() != d {
                    return Err(ModelError::Shape(format!("J has {} entries, algebra dimension is {d}", j.j.len())));
                }
                if omega.is_none() {
                    return Err(ModelError::Shape("[momentum] is only meaningful together with [omega]".into()));
                }
                Some(j.j.iter().enumerate().map(|(a, t)| parse_in(t, &env, || format!("J[{}]", a + 1))).collect::<Result<_, _>>()?)
            }
        };

        let connection = match &raw.connection {
            None => None,
            Some(c) => {
                let d = algebra.as_ref().map_or(0, |g| g.dim());
                if c.a.len() != d {
                    return Err(ModelError::Shape(format!("connection has {} rows, algebra dimension is {d}", c.a.len())));
                }
                Some(parse_rows(&c.a, m, &env, "connection")?)
            }
        };

        let trivialization = match &raw.trivialization {
            None => None,
            Some(t) => {
                let d = algebra.as_ref().map_or(0, |g| g.dim());
                let reduced: Vec<Expr> =
                    t.reduced.iter().enumerate().map(|(k, s)| parse_in(s, &env, || format!("reduced[{}]", k + 1))).collect::<Result<_, _>>()?;
                let q = fresh_names("q", reduced.len(), &alg.coords);
                let qenv = VarEnv::with(&q, Role::Base).map_err(ModelError::Shape)?;
                if t.section.len() != m {
                    return Err(ModelError::Shape(format!("section has {} entries, expected {m}", t.section.len())));
                }
                let section =
                    t.section.iter().enumerate().map(|(k, s)| parse_in(s, &qenv, || format!("section[{}]", k + 1))).collect::<Result<_, _>>()?;
                if t.frame.len() + d != n {
                    return Err(ModelError::Shape(format!("frame has {} sections, expected rank − dim g = {}", t.frame.len(), n.saturating_sub(d))));
                }
                let frame = parse_rows(&t.frame, n, &env, "frame")?;
                let g_slots = t.g_slots.as_ref().map(|s| s.iter().map(|&i| index(i, n, "g-slots")).collect::<Result<Vec<_>, _>>()).transpose()?;
                let invariant_frame = t.invariant_frame.as_ref().map(|r| parse_rows(r, m, &env, "invariant-frame")).transpose()?;
                Some(Trivialization { reduced_names: q, reduced, section, frame, g_slots, invariant_frame })
            }
        };

        let phase_env = if omega.is_some() {
            env.clone()
        } else {
            let (all, _) = dual_chart(&model);
            VarEnv::with(&all, Role::Base).map_err(ModelError::Shape)?
        };
        let hamiltonian = meta.hamiltonian.as_ref().map(|h| parse_in(h, &phase_env, || "hamiltonian".into())).transpose()?;
        let conserved =
            meta.conserved.iter().enumerate().map(|(k, c)| parse_in(c, &phase_env, || format!("conserved[{}]", k + 1))).collect::<Result<_, _>>()?;
        if let (Some(mu), Some(g)) = (&meta.mu, &algebra) {
            if mu.len() != g.dim() {
                return Err(ModelError::Shape(format!("mu has {} entries, algebra dimension is {}", mu.len(), g.dim())));
            }
        }

        Ok(Fixture {
            name: if meta.name.is_empty() { default_name.to_string() } else { meta.name.clone() },
            description: meta.description.clone().unwrap_or_default(),
            model,
            algebra,
            action,
            omega,
            momentum,
            connection,
            trivialization,
            mu: meta.mu.clone(),
            fiber_box,
            hamiltonian,
            conserved,
            raw,
        })
    }

    pub fn require_action(&self) -> Result<&LiftAction, ModelError> {
        self.action.as_ref().ok_or(ModelError::Missing { name: self.name.clone(), section: "action" })
    }

    pub fn require_trivialization(&self) -> Result<&Trivialization, ModelError> {
        self.trivialization.as_ref().ok_or(ModelError::Missing { name: self.name.clone(), section: "trivialization" })
    }

    pub fn require_connection(&self) -> Result<&Vec<Vec<Expr>>, ModelError> {
        self.connection.as_ref().ok_or(ModelError::Missing { name: self.name.clone(), section: "connection" })
    }
}

/// Serializes a model as an `[algebroid]` section (plus a meta header).
pub fn model_to_toml(model: &AlgebroidModel, name: &str, description: &str) -> String {
    let n = model.rank();
    let mut c = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n {
                let e = model.c(i, j, k);
                if !e.is_zero() {
                    c.push(RawStructure { i: i + 1, j: j + 1, k: k + 1, expr: e.to_string() });
                }
            }
        }
    }
    let raw = RawFile {
        meta: Some(RawMeta {
            name: name.to_string(),
            description: Some(description.to_string()),
            sample_box: Some(model.sample_box().iter().map(|&(a, b)| [a, b]).collect()),
            ..Default::default()
        }),
        algebroid: RawAlgebroid {
            coords: model.coords().to_vec(),
            rank: n,
            rho: model.rho_matrix().iter().map(|r| r.iter().map(|e| e.to_string()).collect()).collect(),
            c,
        },
        ..Default::default()
    };
    toml::to_string(&raw).expect("model serializes")
}

/// Lookup of parsed rows by name, for tests and examples.
pub fn exprs_by_name(model: &AlgebroidModel, items: &[(&str, &str)]) -> Result<BTreeMap<String, Expr>, ModelError> {
    let env = VarEnv::with(model.coords(), Role::Base).map_err(ModelError::Shape)?;
    items.iter().map(|(k, v)| Ok((k.to_string(), parse_in(v, &env, || k.to_string())?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[fixture-meta]
name = "small"
box = [[-1, 1], [0.5, 2]]

[algebroid]
coords = ["x", "y"]
rank = 2
rho = [["1", "0"], ["0", "y"]]
C = [{ i = 1, j = 2, k = 2, expr = "1" }]
"#;

    #[test]
    fn loads_and_round_trips() {
        let f = Fixture::from_str(SMALL, "ignored").unwrap();
        assert_eq!(f.name, "small");
        assert_eq!(f.model.c(1, 0, 1), &Expr::int(-1));
        assert_eq!(f.model.sample_box()[1], (0.5, 2.0));
        let text = model_to_toml(&f.model, "copy", "round trip");
        let g = Fixture::from_str(&text, "copy").unwrap();
        assert_eq!(g.model.rho_matrix(), f.model.rho_matrix());
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(g.model.c(i, j, k), f.model.c(i, j, k));
                }
            }
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_shapes() {
        let bad = SMALL.replace("rank = 2", "rank = 2\ncolour = 1");
        assert!(matches!(Fixture::from_str(&bad, "x"), Err(ModelError::Toml(_))));
        let bad = SMALL.replace("[\"0\", \"y\"]", "[\"0\"]");
        assert!(matches!(Fixture::from_str(&bad, "x"), Err(ModelError::Shape(_))));
        let bad = SMALL.replace("expr = \"1\"", "expr = \"z\"");
        assert!(matches!(Fixture::from_str(&bad, "x"), Err(ModelError::Expr { .. })));
        let bad = SMALL.replace("k = 2", "k = 3");
        assert!(matches!(Fixture::from_str(&bad, "x"), Err(ModelError::Shape(_))));
    }
}
