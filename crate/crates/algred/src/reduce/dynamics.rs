//! Hamiltonian flows upstairs and on the reduced space.

use std::collections::BTreeMap;

use super::cotangent::MagneticTerm;
use super::poisson::constant;
use super::{differential, QuotientModel, ReduceError, Setting};
use crate::config::Settings;
use crate::hamiltonian::{solve_exprs, SymplecticSection};
use crate::lifts::{fresh_names, rk4};
use crate::model::{Fixture, ModelError};
use crate::prolong::{build_prolongation_named, ProlongedModel};
use crate::report::{Record, Sample};
use crate::sampling::{identity_record, Sampler};
use crate::symexpr::{Compiled, EvalError, Expr};

#[derive(Clone, Debug, serde::Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Integrates ρ(H_h) with H_h solved pointwise from Ωᵀ H = d_A h, recording
/// the state every `every` steps and at the end.
pub fn integrate(omega: &SymplecticSection, h: &Expr, z0: &[f64], t: f64, step: f64, every: usize) -> Result<Trajectory, ReduceError> {
    let model = omega.model();
    let dh = differential(model, h)?;
    let rho: Vec<Vec<Compiled>> = (0..model.rank())
        .map(|big| model.rho_matrix()[big].iter().map(|e| e.compile(model.coords())).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;
    let field = |z: &[f64]| -> Result<Vec<f64>, EvalError> {
        let df: Vec<f64> = dh.iter().map(|c| c.eval(z)).collect::<Result<_, _>>()?;
        let hs = omega.hamiltonian_at(&df, z).map_err(|e| EvalError::DivisionByZero(e.to_string()))?;
        let mut v = vec![0.0; z.len()];
        for (hi, row) in hs.iter().zip(&rho) {
            for (vi, c) in v.iter_mut().zip(row) {
                *vi += hi * c.eval(z)?;
            }
        }
        Ok(v)
    };
    let steps = (t / step).round().max(1.0) as usize;
    let dt = t / steps as f64;
    let every = every.max(1);
    let mut z = z0.to_vec();
    let mut out = Trajectory { times: vec![0.0], states: vec![z.clone()] };
    for k in 1..=steps {
        z = rk4(&field, &z, dt, dt)?;
        if k % every == 0 || k == steps {
            out.times.push(k as f64 * dt);
            out.states.push(z.clone());
        }
    }
    Ok(out)
}

/// The reduced Hamiltonian system on A₀* with Ω_{A₀} − B and the projection
/// (x, y) ↦ (r(x), y·X_γ(x) − α_μ(X_γ)(x)) from J⁻¹(μ).
pub struct ReducedSystem {
    pub prolonged: ProlongedModel,
    pub omega: SymplecticSection,
    pub hamiltonian: Expr,
    projection: Vec<Compiled>,
}

impl ReducedSystem {
    pub fn new(set: &Setting, quo: &QuotientModel, mag: Option<&MagneticTerm>, mu: &[f64], h: &Expr) -> Result<ReducedSystem, ReduceError> {
        let p = set.require_prolonged("reduced dynamics")?;
        let d = set.action().dim();
        let iso = set.isotropy(mu, &Settings::default()).ncols();
        if iso != d {
            return Err(ReduceError::Isotropy("reduced dynamics", iso, d));
        }
        if mag.is_none() && mu.iter().any(|v| *v != 0.0) {
            return Err(ReduceError::Shape("μ ≠ 0 needs a connection".into()));
        }
        let parent = p.parent();
        let (prolonged, omega) = reduced_form(set, quo, mag)?;
        let pn = prolonged.fiber().to_vec();
        let alpha_on = |x: &crate::algebroid::SectionField| -> Result<Expr, ReduceError> {
            Ok(match mag {
                None => Expr::zero(),
                Some(m) => parent.pair(&m.alpha, x)?,
            })
        };
        let at_section = quo.section_map();
        let n = parent.rank();
        let mut rows: Vec<Vec<Expr>> = Vec::with_capacity(n);
        let mut rhs: Vec<Vec<Expr>> = Vec::with_capacity(n);
        for (g, x) in quo.frame().iter().enumerate() {
            rows.push(x.comps().iter().map(|c| c.subst(&at_section)).collect());
            rhs.push(vec![Expr::var(&pn[g]) + alpha_on(x)?.subst(&at_section)]);
        }
        for a in 0..d {
            rows.push(set.parent_action.psi(a).comps().iter().map(|c| c.subst(&at_section)).collect());
            rhs.push(vec![constant(mu[a])]);
        }
        let y = solve_exprs(&rows, &rhs).ok_or(ReduceError::FrameDegenerate)?;
        let mut up = at_section.clone();
        for (name, v) in p.fiber().iter().zip(y) {
            up.insert(name.clone(), v[0].clone());
        }
        let hamiltonian = h.subst(&up);

        let coords = set.model().coords();
        let mut projection: Vec<Compiled> = quo.reduced().iter().map(|r| r.compile(coords)).collect::<Result<_, _>>()?;
        for x in quo.frame() {
            let e: Expr = x.comps().iter().zip(p.fiber()).map(|(c, yv)| c * Expr::var(yv)).sum::<Expr>() - alpha_on(x)?;
            projection.push(e.compile(coords)?);
        }
        Ok(ReducedSystem { prolonged, omega, hamiltonian, projection })
    }

    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>, ReduceError> {
        Ok(self.projection.iter().map(|c| c.eval(z)).collect::<Result<_, _>>()?)
    }
}

/// A₀* with Ω_{A₀} − pr₁*B (or Ω_{A₀} without a magnetic term).
pub fn reduced_form(set: &Setting, quo: &QuotientModel, mag: Option<&MagneticTerm>) -> Result<(ProlongedModel, SymplecticSection), ReduceError> {
    let a0 = quo.model();
    let k = a0.rank();
    let mut taken = a0.coords().to_vec();
    taken.extend(set.model().coords().iter().cloned());
    let pn = fresh_names("p", k, &taken);
    let prolonged = build_prolongation_named(a0, pn, (-2.0, 2.0))?;
    let base = prolonged.omega()?;
    let form = match mag {
        None => base.form().clone(),
        Some(m) => {
            let mut comps = BTreeMap::new();
            for g in 0..k {
                for h in g + 1..k {
                    let v = m.b.get(&[g, h]);
                    if !v.is_zero() {
                        comps.insert(vec![g, h], v);
                    }
                }
            }
            base.form().sub(&prolonged.model().form(2, comps)?)
        }
    };
    let omega = SymplecticSection::new(prolonged.model().clone(), form)?;
    Ok((prolonged, omega))
}

/// d(Ω_{A₀} − pr₁*B) = 0 on the reduced model.
pub fn check_reduced_form_closed(set: &Setting, quo: &QuotientModel, mag: Option<&MagneticTerm>, settings: &Settings) -> Result<Record, ReduceError> {
    let (p, w) = reduced_form(set, quo, mag)?;
    let dd: Vec<Expr> = p.model().d(w.form())?.components().map(|(_, e)| e.clone()).collect();
    Ok(identity_record(
        "reduce/reduced-form-closed",
        "reduced-form-closed",
        &dd,
        &p.model().sample_ranges(),
        settings.seed,
        settings.samples,
        settings.tol.sampled_identity,
    ))
}

/// Conservation along the flow of the fixture's Hamiltonian over T = 10, and
/// agreement of the projected flow with the reduced flow over T = 5.
pub fn check_dynamics(f: &Fixture, set: &Setting, settings: &Settings) -> Result<(Vec<Record>, Option<(Trajectory, Trajectory)>), ReduceError> {
    let h = f.hamiltonian.clone().ok_or(ModelError::Missing { name: f.name.clone(), section: "fixture-meta.hamiltonian" })?;
    let model = set.model();
    let mut s = Sampler::derived(settings.seed, "dynamics");
    let z0 = s.point_in(&model.sample_box().iter().map(|(lo, hi)| (0.75 * lo + 0.25 * hi, 0.25 * lo + 0.75 * hi)).collect::<Vec<_>>());
    let traj = integrate(&set.omega, &h, &z0, 10.0, settings.step, 10)?;
    let mut out = Vec::new();

    let drift = |e: &Expr| -> Result<f64, ReduceError> {
        let c = e.compile(model.coords())?;
        let v0 = c.eval(&z0)?;
        let mut w = 0.0f64;
        for z in &traj.states {
            w = w.max((c.eval(z)? - v0).abs());
        }
        Ok(w)
    };
    let n = Sample::Sampled(traj.states.len());
    out.push(Record::new("dynamics/energy-conserved", "hamiltonian-conserved", n.clone(), drift(&h)?, settings.tol.casimir));
    if !f.conserved.is_empty() {
        let mut w = 0.0f64;
        for c in &f.conserved {
            w = w.max(drift(c)?);
        }
        out.push(Record::new("dynamics/conserved", "declared-conserved-quantities", n.clone(), w, settings.tol.casimir));
    }
    let d = set.action().dim();
    let mut invariant = true;
    for a in 0..d {
        invariant &= model.anchor_apply(set.action().psi(a), &h)?.is_identically_zero();
    }
    if invariant && d > 0 {
        let w = set.momentum.comps().iter().map(&drift).collect::<Result<Vec<_>, _>>()?.into_iter().fold(0.0, f64::max);
        out.push(Record::new("dynamics/momentum-conserved", "momentum-conserved-by-invariant-flow", n, w, settings.tol.momentum_drift));
    } else {
        out.push(
            Record::new("dynamics/momentum-conserved", "momentum-conserved-by-invariant-flow", Sample::NotApplicable, 0.0, settings.tol.momentum_drift)
                .with_note("Hamiltonian is not invariant"),
        );
    }

    let mu = f.mu.clone().unwrap_or_else(|| vec![0.0; d]);
    let reducible = f.trivialization.is_some() && set.isotropy(&mu, settings).ncols() == d && set.prolonged.is_some();
    if !reducible || !invariant {
        out.push(
            Record::new("dynamics/reduced-trajectory", "projected-flow-is-reduced-flow", Sample::NotApplicable, 0.0, settings.tol.reduced_trajectory)
                .with_note("needs an invariant Hamiltonian, a trivialization and G_μ = G"),
        );
        return Ok((out, None));
    }
    let quo = QuotientModel::new(&set.parent_action, f.require_trivialization()?)?;
    let mag = match (&f.connection, mu.iter().any(|v| *v != 0.0)) {
        (Some(c), true) => Some(MagneticTerm::new(&set.parent_action, &quo, c, &mu)?),
        _ => None,
    };
    let red = ReducedSystem::new(set, &quo, mag.as_ref(), &mu, &h)?;
    let start = set.level_points(&mu, 1, settings)?.remove(0);
    let full = integrate(&set.omega, &h, &start, 5.0, settings.step, 10)?;
    let reduced = integrate(&red.omega, &red.hamiltonian, &red.project(&start)?, 5.0, settings.step, 10)?;
    let mut worst = 0.0f64;
    let mut projected = Trajectory { times: full.times.clone(), states: Vec::with_capacity(full.states.len()) };
    for (z, r) in full.states.iter().zip(&reduced.states) {
        let pz = red.project(z)?;
        worst = pz.iter().zip(r).fold(worst, |m, (a, b)| m.max((a - b).abs()));
        projected.states.push(pz);
    }
    out.push(Record::new("dynamics/reduced-trajectory", "projected-flow-is-reduced-flow", Sample::Sampled(full.states.len()), worst, settings.tol.reduced_trajectory));
    Ok((out, Some((projected, reduced))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn harmonic_oscillator_in_the_plane() {
        // Ω = dx∧dy on T(R) ≅ R², h = (x² + y²)/2: a rotation with period 2π.
        let f = fixtures::load("fix-tm2").unwrap();
        let p = crate::prolong::build_prolongation(&f.model).unwrap();
        let w = p.omega().unwrap();
        let h = crate::symexpr::parse("y1^2/2 + x1^2/2", &crate::symexpr::VarEnv::with(p.model().coords(), crate::symexpr::Role::Base).unwrap()).unwrap();
        let t = integrate(&w, &h, &[1.0, 0.0, 0.0, 0.0], std::f64::consts::PI, 1e-3, 100).unwrap();
        let end = t.states.last().unwrap();
        assert!((end[0] + 1.0).abs() < 1e-9 && end[2].abs() < 1e-9, "{end:?}");
    }

    #[test]
    fn fixture_dynamics() {
        let s = Settings::default();
        for name in ["fix-so3", "fix-tm2-translation", "fix-mag", "fix-so3-act"] {
            let f = fixtures::load(name).unwrap();
            let set = Setting::from_fixture(&f).unwrap();
            let (recs, _) = check_dynamics(&f, &set, &s).unwrap();
            assert!(recs.iter().all(|r| r.pass), "{name}: {recs:?}");
        }
    }
}
