//! The reduced bracket on J⁻¹(μ)/G_μ against the bracket of invariant
//! extensions upstairs.

use std::collections::BTreeMap;

use super::{differential, eval_vec, QuotientModel, ReduceError, Setting};
use crate::config::Settings;
use crate::lifts::fresh_names;
use crate::report::{Record, Sample};
use crate::sampling::{identity_record, Sampler};
use crate::symexpr::Expr;

/// Coordinates on the reduced space pulled back to the prolonged chart:
/// the invariant base coordinates r(x) and the frame momenta y·X_γ(x).
pub fn level_coordinates(set: &Setting, quo: &QuotientModel) -> Result<(Vec<String>, BTreeMap<String, Expr>), ReduceError> {
    let p = set.require_prolonged("the reduced bracket")?;
    let qn = quo.model().coords().to_vec();
    let mut taken = qn.clone();
    taken.extend(set.model().coords().iter().cloned());
    let pn = fresh_names("p", quo.frame().len(), &taken);
    let mut map: BTreeMap<String, Expr> = qn.iter().cloned().zip(quo.reduced().iter().cloned()).collect();
    for (name, x) in pn.iter().zip(quo.frame()) {
        map.insert(name.clone(), x.comps().iter().zip(p.fiber()).map(|(c, y)| c * Expr::var(y)).sum());
    }
    let mut names = qn;
    names.extend(pn);
    Ok((names, map))
}

/// Functions vanishing on J⁻¹(μ) that are invariant under the lifted action:
/// J_a − μ_a for central directions, and |J|² − |μ|² when it is invariant.
pub fn level_invariants(set: &Setting, mu: &[f64]) -> Result<Vec<Expr>, ReduceError> {
    let alg = set.action().algebra();
    let d = alg.dim();
    let j = set.momentum.comps();
    let mut cands = Vec::new();
    for a in 0..d {
        let central = (0..d).all(|b| (0..d).all(|e| alg.c(b, a, e).is_zero()));
        if central {
            cands.push(&j[a] - &constant(mu[a]));
        }
    }
    if cands.len() < d {
        let sq: Expr = j.iter().map(|c| c * c).sum();
        cands.push(sq - constant(mu.iter().map(|m| m * m).sum()));
    }
    let mut out = Vec::new();
    for c in cands {
        let mut inv = true;
        for a in 0..d {
            inv &= set.model().anchor_apply(set.action().psi(a), &c)?.is_identically_zero();
        }
        if inv {
            out.push(c);
        }
    }
    Ok(out)
}

pub(crate) fn constant(v: f64) -> Expr {
    crate::symexpr::rational_from_f64(v).map(Expr::rational).unwrap_or_else(Expr::zero)
}

/// {f, g}_μ computed on K/G_μ from Ω_μ against {F, G} computed upstairs for
/// invariant extensions F, G of f∘r_μ, g∘r_μ, at sampled points of J⁻¹(μ).
/// Test functions are random quadratics in the reduced coordinates.
pub fn check_reduced_bracket(
    set: &Setting,
    quo: &QuotientModel,
    mu: &[f64],
    pts: &[Vec<f64>],
    settings: &Settings,
) -> Result<Vec<Record>, ReduceError> {
    let (names, level) = level_coordinates(set, quo)?;
    let invs = level_invariants(set, mu)?;
    let model = set.model();
    let mut s = Sampler::derived(settings.seed, "reduced-bracket");
    let mut invariance = Vec::new();
    let mut worst = 0.0f64;
    let mut worst_const = 0.0f64;
    for pair in 0..4 {
        let (ft, gt) = if pair == 0 {
            (s.small_rational(), s.polynomial(&names, 2))
        } else {
            (s.polynomial(&names, 2), s.polynomial(&names, 2))
        };
        let (f0, g0) = (ft.subst(&level), gt.subst(&level));
        let mut extend = |e: &Expr| -> Expr {
            invs.iter().fold(e.clone(), |acc, inv| acc + inv * (s.small_rational() + s.polynomial(&names, 1).subst(&level)))
        };
        let (f, g) = (extend(&f0), extend(&g0));
        for a in 0..set.action().dim() {
            invariance.push(model.anchor_apply(set.action().psi(a), &f)?);
            invariance.push(model.anchor_apply(set.action().psi(a), &g)?);
        }
        let (df0, dg0, df, dg) = (differential(model, &f0)?, differential(model, &g0)?, differential(model, &f)?, differential(model, &g)?);
        for x in pts {
            let rf = set.reduce_fiber(mu, x, settings)?;
            let left = if rf.dim() == 0 {
                0.0
            } else {
                let dfq = rf.q.transpose() * eval_vec(&df0, x)?;
                let dgq = rf.q.transpose() * eval_vec(&dg0, x)?;
                let h = rf.omega.transpose().lu().solve(&dgq).ok_or_else(|| ReduceError::Shape("reduced form is singular".into()))?;
                dfq.dot(&h)
            };
            let hg = set.omega.hamiltonian_at(eval_vec(&dg, x)?.as_slice(), x)?;
            let right: f64 = eval_vec(&df, x)?.iter().zip(&hg).map(|(a, b)| a * b).sum();
            let r = (left - right).abs();
            if pair == 0 {
                worst_const = worst_const.max(r);
            } else {
                worst = worst.max(r);
            }
        }
    }
    let n = Sample::Sampled(pts.len());
    let note = format!("{} level-set invariants used in the extensions", invs.len());
    Ok(vec![
        identity_record(
            "bracket/extension-invariant",
            "extensions-are-invariant",
            &invariance,
            &model.sample_ranges(),
            settings.seed,
            settings.samples,
            settings.tol.sampled_identity,
        ),
        Record::new("bracket/reduced-agrees", "reduced-bracket-matches-extensions", n.clone(), worst, settings.tol.reduced_bracket).with_note(note),
        Record::new("bracket/constant-function", "reduced-bracket-of-constant", n, worst_const, settings.tol.reduced_bracket),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn run(name: &str) -> Vec<Record> {
        let f = fixtures::load(name).unwrap();
        let s = Settings::default();
        let set = Setting::from_fixture(&f).unwrap();
        let quo = QuotientModel::new(&set.parent_action, f.trivialization.as_ref().unwrap()).unwrap();
        let mu = f.mu.clone().unwrap();
        let pts = set.level_points(&mu, 10, &s).unwrap();
        check_reduced_bracket(&set, &quo, &mu, &pts, &s).unwrap()
    }

    #[test]
    fn reduced_bracket_on_fixtures() {
        for name in ["fix-tm2-translation", "fix-so3", "fix-act", "fix-mag"] {
            let recs = run(name);
            assert!(recs.iter().all(|r| r.pass), "{name}: {recs:?}");
        }
    }

    #[test]
    fn rigid_body_uses_the_casimir() {
        let f = fixtures::load("fix-so3").unwrap();
        let set = Setting::from_fixture(&f).unwrap();
        let inv = level_invariants(&set, &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(inv.len(), 1);
        assert!(inv[0].free_vars().len() == 3);
    }
}
