//! The prolongation of A over A*: a rank-2n algebroid over the chart (x, y)
//! with projectable basis {X_I, Y^I}, its Liouville section, the canonical
//! symplectic-like section, the lifted action and the momentum map on A*.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::algebroid::{AlgebroidError, AlgebroidModel, KFormField};
use crate::config::Settings;
use crate::hamiltonian::{linear_poisson, HamError, MomentumMap, SymplecticSection};
use crate::lifts::{complete_lift_dual, dual_chart, LiftAction, LiftError};
use crate::report::{Record, Sample};
use crate::sampling::{identity_record, Sampler};
use crate::symexpr::{EvalError, Expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProlongError {
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Ham(#[from] HamError),
    #[error("fiber coordinate {0} collides with a base coordinate")]
    Collision(String),
    #[error("−dλ differs from the local expression of Ω in component {idx:?}: {residual}")]
    OmegaMismatch { idx: Vec<usize>, residual: String },
}

#[derive(Clone, Debug)]
pub struct ProlongedModel {
    parent: AlgebroidModel,
    model: AlgebroidModel,
    fiber: Vec<String>,
}

/// The prolongation with fiber coordinates y1..yn.
pub fn build_prolongation(parent: &AlgebroidModel) -> Result<ProlongedModel, ProlongError> {
    let (_, y) = dual_chart(parent);
    build_prolongation_named(parent, y, (-2.0, 2.0))
}

/// The prolongation with chosen fiber coordinate names and fiber sample range.
pub fn build_prolongation_named(parent: &AlgebroidModel, fiber: Vec<String>, range: (f64, f64)) -> Result<ProlongedModel, ProlongError> {
    let parent = parent.clone().validated()?;
    let (n, m) = (parent.rank(), parent.dim());
    if fiber.len() != n {
        return Err(ProlongError::Lift(LiftError::Shape("one fiber name per basis section".into())));
    }
    if let Some(c) = fiber.iter().find(|f| parent.coords().contains(f)) {
        return Err(ProlongError::Collision(c.clone()));
    }
    let mut coords = parent.coords().to_vec();
    coords.extend(fiber.iter().cloned());
    let mut rho = vec![vec![Expr::zero(); m + n]; 2 * n];
    for big in 0..n {
        for i in 0..m {
            rho[big][i] = parent.rho(big, i).clone();
        }
        rho[n + big][m + big] = Expr::one();
    }
    let mut c = vec![vec![vec![Expr::zero(); 2 * n]; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c[i][j][k] = parent.c(i, j, k).clone();
            }
        }
    }
    let mut labels: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
    labels.extend((1..=n).map(|i| format!("Y{i}")));
    let mut model = AlgebroidModel::new(coords, 2 * n, rho, c)?.relabel(labels);
    let mut bx = parent.sample_box().to_vec();
    bx.extend(std::iter::repeat(range).take(n));
    model.set_sample_box(bx)?;
    Ok(ProlongedModel { parent, model, fiber })
}

impl ProlongedModel {
    pub fn parent(&self) -> &AlgebroidModel {
        &self.parent
    }

    pub fn model(&self) -> &AlgebroidModel {
        &self.model
    }

    pub fn fiber(&self) -> &[String] {
        &self.fiber
    }

    /// λ = y_I X^I.
    pub fn liouville(&self) -> KFormField {
        let n = self.parent.rank();
        let mut comps: Vec<Expr> = self.fiber.iter().map(|y| Expr::var(y)).collect();
        comps.extend(vec![Expr::zero(); n]);
        self.model.one_form(comps).expect("rank 2n")
    }

    /// Ω = X^I∧Y_I + ½ C_IJ^K y_K X^I∧X^J.
    pub fn omega_local(&self) -> KFormField {
        let n = self.parent.rank();
        let mut comps = BTreeMap::new();
        for i in 0..n {
            comps.insert(vec![i, n + i], Expr::one());
            for j in i + 1..n {
                let v: Expr = (0..n).map(|k| self.parent.c(i, j, k) * Expr::var(&self.fiber[k])).sum();
                if !v.is_zero() {
                    comps.insert(vec![i, j], v);
                }
            }
        }
        self.model.form(2, comps).expect("rank 2n")
    }

    /// −dλ, checked against the local expression.
    pub fn omega(&self) -> Result<SymplecticSection, ProlongError> {
        let exact = self.model.d(&self.liouville())?.scale(&Expr::int(-1));
        let local = self.omega_local();
        let diff = exact.sub(&local);
        if let Some((idx, e)) = diff.components().find(|(_, e)| !e.is_identically_zero()) {
            return Err(ProlongError::OmegaMismatch { idx: idx.iter().map(|i| i + 1).collect(), residual: e.to_string() });
        }
        Ok(SymplecticSection::new(self.model.clone(), exact)?)
    }

    /// ψ^T(ξ) = (ψ(ξ), ξ_{A*}) with ξ_{A*} = ψ(ξ)^{*c}.
    pub fn lifted_action(&self, act: &LiftAction) -> Result<LiftAction, ProlongError> {
        let n = self.parent.rank();
        let m = self.parent.dim();
        let (_, y) = dual_chart(&self.parent);
        let rename: BTreeMap<String, Expr> = y.iter().zip(&self.fiber).map(|(a, b)| (a.clone(), Expr::var(b))).collect();
        let mut rows = Vec::with_capacity(act.dim());
        for a in 0..act.dim() {
            let psi = act.psi(a);
            let lift = complete_lift_dual(&self.parent, psi)?;
            let mut row: Vec<Expr> = psi.comps().to_vec();
            row.extend(lift.comps[m..m + n].iter().map(|e| e.subst(&rename)));
            rows.push(row);
        }
        let lifted = LiftAction::new(act.algebra().clone(), self.model.clone(), rows, None, act.free())?;
        Ok(lifted.validated()?)
    }

    /// (J_{A*})_a = y_I ψ_a^I(x), a momentum map for the lifted action.
    pub fn momentum(&self, act: &LiftAction) -> Result<MomentumMap, ProlongError> {
        let lifted = self.lifted_action(act)?;
        let comps = (0..act.dim())
            .map(|a| act.psi(a).comps().iter().zip(&self.fiber).map(|(p, y)| p * Expr::var(y)).sum())
            .collect();
        Ok(MomentumMap::new(lifted, comps)?)
    }

    /// J^T_{A*}(a, v) = (T J_{A*}(v), J_{A*}(α)) with v = ρ(a)^i ∂_i + b_I ∂_{y_I},
    /// written out directly from the components of J_{A*}.
    pub fn j_t_direct(&self, j: &MomentumMap, p: &[f64], ab: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let n = self.parent.rank();
        let m = self.parent.dim();
        let coords = self.model.coords();
        let mut v = vec![0.0; m + n];
        for big in 0..n {
            for i in 0..m {
                let r = self.parent.rho(big, i);
                if !r.is_zero() {
                    v[i] += ab[big] * r.compile(self.parent.coords())?.eval(&p[..m])?;
                }
            }
            v[m + big] = ab[n + big];
        }
        let mut first = Vec::with_capacity(j.comps().len());
        for c in j.comps() {
            let mut acc = 0.0;
            for (k, name) in coords.iter().enumerate() {
                if v[k] != 0.0 {
                    acc += v[k] * c.diff(name).compile(coords)?.eval(p)?;
                }
            }
            first.push(acc);
        }
        Ok((first, j.value(p)?))
    }

    /// The bracket {f, g} = ρ(H_g)(f) of Ω on random functions, polynomial of
    /// degree ≤ 2 in (x, y), against the linear Poisson bracket of the parent.
    pub fn check_poisson_cover(&self, settings: &Settings) -> Result<Record, ProlongError> {
        let mut s = Sampler::derived(settings.seed, "poisson-cover");
        let omega = self.omega()?;
        let (_, y) = dual_chart(&self.parent);
        let to_dual: BTreeMap<String, Expr> = self.fiber.iter().zip(&y).map(|(a, b)| (a.clone(), Expr::var(b))).collect();
        let coords = self.model.coords().to_vec();
        let mut diff = Vec::new();
        for _ in 0..3 {
            let (f, g) = (s.polynomial(&coords, 2), s.polynomial(&coords, 2));
            let lp = linear_poisson(&self.parent, &f.subst(&to_dual), &g.subst(&to_dual))?;
            diff.push(omega.base_poisson(&f, &g)?.subst(&to_dual) - lp);
        }
        let mut ranges = self.model.sample_ranges();
        ranges.extend(y.iter().map(|v| (v.clone(), (-2.0, 2.0))));
        Ok(identity_record("prolong/poisson-cover", "bracket-of-omega-is-linear-poisson", &diff, &ranges, settings.seed, settings.samples, settings.tol.sampled_identity))
    }

    /// Over a Lie algebra g (no base coordinates): at sampled η₀ ∈ g*,
    /// Ω((ξ,η),(ξ',η')) = η'(ξ) − η(ξ') + η₀([ξ,ξ']) entry by entry.
    pub fn check_lie_algebra_cover(&self, settings: &Settings, count: usize) -> Result<Record, ProlongError> {
        let id = "prolong/lie-algebra-cover";
        let anchor = "canonical-cover-of-lie-algebra";
        if self.parent.dim() != 0 {
            return Ok(Record::new(id, anchor, Sample::NotApplicable, 0.0, 0.0).with_note("the parent has base coordinates"));
        }
        let n = self.parent.rank();
        let omega = self.omega()?;
        let mut s = Sampler::derived(settings.seed, "lie-algebra-cover");
        let mut worst = 0.0f64;
        for _ in 0..count {
            let eta0 = s.vector(n, -2.0, 2.0);
            let w = omega.matrix_at(&eta0).map_err(HamError::from)?;
            for a in 0..2 * n {
                for b in 0..2 * n {
                    // Basis vectors: ξ = e_a for a < n, η = e^{a−n} otherwise.
                    let expect = match (a < n, b < n) {
                        (true, true) => (0..n).map(|k| self.parent.c(a, b, k).to_f64().unwrap_or(f64::NAN) * eta0[k]).sum(),
                        (true, false) => if b - n == a { 1.0 } else { 0.0 },
                        (false, true) => if a - n == b { -1.0 } else { 0.0 },
                        (false, false) => 0.0,
                    };
                    worst = worst.max((w[(a, b)] - expect).abs());
                }
            }
        }
        Ok(Record::new(id, anchor, Sample::Sampled(count), worst, settings.tol.sampled_identity))
    }

    /// Prolongation-specific identities: −dλ = Ω, λ preserved by ψ^T, Ω closed.
    pub fn check(&self, act: Option<&LiftAction>, settings: &Settings) -> Result<Vec<Record>, ProlongError> {
        let ranges = self.model.sample_ranges();
        let tol = settings.tol.sampled_identity;
        let exact = self.model.d(&self.liouville())?.scale(&Expr::int(-1));
        let diff: Vec<Expr> = exact.sub(&self.omega_local()).components().map(|(_, e)| e.clone()).collect();
        let mut out = vec![identity_record("prolong/liouville-differential", "omega-is-minus-d-liouville", &diff, &ranges, settings.seed, settings.samples, tol)];
        let dd: Vec<Expr> = self.model.d(&exact)?.components().map(|(_, e)| e.clone()).collect();
        out.push(identity_record("prolong/omega-closed", "omega-closed", &dd, &ranges, settings.seed, settings.samples, tol));
        if let Some(act) = act {
            let lifted = self.lifted_action(act)?;
            let lam = self.liouville();
            let mut inv = Vec::new();
            for a in 0..lifted.dim() {
                inv.extend(self.model.lie_derivative_form(lifted.psi(a), &lam)?.components().map(|(_, e)| e.clone()).collect::<Vec<_>>());
            }
            out.push(identity_record("prolong/liouville-invariant", "lifted-action-preserves-liouville", &inv, &ranges, settings.seed, settings.samples, tol));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::LieAlgebra;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn tm2() -> AlgebroidModel {
        let rho = vec![vec![Expr::one(), Expr::zero()], vec![Expr::zero(), Expr::one()]];
        AlgebroidModel::from_sparse(names(&["x1", "x2"]), 2, rho, &[]).unwrap()
    }

    fn so3() -> AlgebroidModel {
        let e: Vec<_> = [(0, 1, 2), (1, 2, 0), (2, 0, 1)].iter().map(|&(i, j, k)| (i, j, k, Expr::one())).collect();
        AlgebroidModel::from_sparse(vec![], 3, vec![vec![]; 3], &e).unwrap()
    }

    #[test]
    fn tangent_prolongation_is_canonical() {
        let p = build_prolongation(&tm2()).unwrap();
        assert_eq!(p.model().coords(), &names(&["x1", "x2", "y1", "y2"]));
        let s = Settings::default();
        assert!(p.model().check_axioms(&s).iter().all(|r| r.pass));
        let w = p.omega().unwrap();
        let m = w.matrix_at(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let expect = [[0., 0., 1., 0.], [0., 0., 0., 1.], [-1., 0., 0., 0.], [0., -1., 0., 0.]];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[(i, j)], expect[i][j]);
            }
        }
        assert_eq!(w.base_poisson(&Expr::var("x1"), &Expr::var("y1")).unwrap(), Expr::one());
    }

    #[test]
    fn so3_prolongation_omega_at_north_pole() {
        let p = build_prolongation(&so3()).unwrap();
        assert!(p.model().check_axioms(&Settings::default()).iter().all(|r| r.pass));
        let w = p.omega().unwrap();
        // Ω((ξ,η),(ξ',η')) = η'(ξ) − η(ξ') + y([ξ,ξ']) at y = (0,0,1).
        let m = w.matrix_at(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(m[(0, 1)], 1.0);
        assert_eq!(m[(1, 0)], -1.0);
        assert_eq!(m[(0, 2)], 0.0);
        assert_eq!(m[(1, 4)], 1.0);
        assert_eq!(m[(4, 1)], -1.0);
        let b = w.base_poisson(&Expr::var("y1"), &Expr::var("y2")).unwrap();
        assert_eq!(b, -Expr::var("y3"));
    }

    #[test]
    fn covers_match_linear_poisson_and_lie_algebra_formula() {
        let s = Settings::default();
        for m in [tm2(), so3()] {
            let p = build_prolongation(&m).unwrap();
            assert!(p.check_poisson_cover(&s).unwrap().pass);
        }
        let r = build_prolongation(&so3()).unwrap().check_lie_algebra_cover(&s, 20).unwrap();
        assert!(r.pass && r.residual == 0.0, "{r:?}");
    }

    #[test]
    fn translation_lift_and_momentum() {
        let base = tm2();
        let p = build_prolongation(&base).unwrap();
        let act = LiftAction::new(LieAlgebra::abelian(1), base, vec![vec![Expr::one(), Expr::zero()]], None, true).unwrap();
        let lifted = p.lifted_action(&act).unwrap();
        assert_eq!(lifted.psi(0).comps(), &[Expr::one(), Expr::zero(), Expr::zero(), Expr::zero()]);
        let j = p.momentum(&act).unwrap();
        assert_eq!(j.comps(), &[Expr::var("y1")]);
        let s = Settings::default();
        let w = p.omega().unwrap();
        assert!(j.check_hamiltonian_action(&w, &s).unwrap().iter().all(|r| r.pass));
        assert!(p.check(Some(&act), &s).unwrap().iter().all(|r| r.pass));
        let pt = [0.1, -0.3, 0.7, 0.2];
        let ab = [0.5, 1.0, -2.0, 0.25];
        assert_eq!(p.j_t_direct(&j, &pt, &ab).unwrap(), j.j_t(&pt, &ab).unwrap());
    }

    #[test]
    fn fiber_name_collision_is_rejected() {
        let rho = vec![vec![Expr::one()]];
        let m = AlgebroidModel::from_sparse(names(&["p1"]), 1, rho, &[]).unwrap();
        assert!(matches!(build_prolongation_named(&m, names(&["p1"]), (-1.0, 1.0)), Err(ProlongError::Collision(_))));
    }
}
