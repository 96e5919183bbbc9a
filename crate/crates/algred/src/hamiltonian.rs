//! Symplectic-like sections, Hamiltonian sections and brackets, the linear
//! Poisson structure on A*, Hamiltonian actions and momentum maps.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::DVector;
use thiserror::Error;

use crate::algebroid::{AlgebroidError, AlgebroidModel, KFormField, SectionField};
use crate::config::Settings;
use crate::liegroup::{GroupElement, TGElement};
use crate::lifts::{complete_lift_dual, dual_chart, linear_function_dual, LiftAction, LiftError};
use crate::linalg::{intersection, null_space, rank, same_subspace, scaled_det, Mat};
use crate::report::{Record, Sample};
use crate::sampling::{identity_record, Sampler};
use crate::symexpr::{Compiled, EvalError, Expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamError {
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("Ω is singular at {0:?}")]
    Singular(Vec<f64>),
    #[error("Ω has no symbolic inverse")]
    SymbolicSingular,
    #[error("point is off the level set: |J(x) − μ| = {0:e}")]
    OffLevelSet(f64),
    #[error("rank of TJ∘ρ jumps across the level set: {expected} vs {got}")]
    ConstantRank { expected: usize, got: usize },
    #[error("expression is not polynomial in the fiber coordinate {0}")]
    NonPolynomialFiber(String),
}

/// Solves A·X = B over rational functions by Gauss–Jordan elimination.
/// Pivots prefer constants, then the shortest printed entry. `None` if A is
/// singular as a matrix of rational functions.
pub fn solve_exprs(a: &[Vec<Expr>], b: &[Vec<Expr>]) -> Option<Vec<Vec<Expr>>> {
    let n = a.len();
    let k = b.first().map_or(0, |r| r.len());
    let mut m: Vec<Vec<Expr>> = a.iter().zip(b).map(|(r, s)| r.iter().chain(s).cloned().collect()).collect();
    for col in 0..n {
        let piv = (col..n)
            .filter(|&r| !m[r][col].is_zero())
            .min_by_key(|&r| (m[r][col].as_rational().is_none(), m[r][col].to_string().len()))?;
        m.swap(col, piv);
        let inv = m[col][col].recip();
        m[col] = m[col].iter().map(|e| e * &inv).collect();
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for c in col..n + k {
                if !m[col][c].is_zero() {
                    m[r][c] = &m[r][c] - &(&f * &m[col][c]);
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// A nondegenerate closed 2-section Ω.
#[derive(Clone, Debug)]
pub struct SymplecticSection {
    model: AlgebroidModel,
    form: KFormField,
    matrix: Vec<Vec<Expr>>,
    compiled: Vec<Compiled>,
    /// Π = −Ω⁻¹, so that H_f = Π·d_A f.
    poisson: OnceLock<Option<Vec<Vec<Expr>>>>,
}

impl SymplecticSection {
    pub fn new(model: AlgebroidModel, form: KFormField) -> Result<SymplecticSection, HamError> {
        if form.degree() != 2 || form.model_id() != model.id() {
            return Err(HamError::Shape("Ω must be a 2-form on the given model".into()));
        }
        let n = model.rank();
        let matrix: Vec<Vec<Expr>> = (0..n).map(|i| (0..n).map(|j| form.get(&[i, j])).collect()).collect();
        let compiled = matrix.iter().flatten().map(|e| e.compile(model.coords())).collect::<Result<_, _>>()?;
        Ok(SymplecticSection { model, form, matrix, compiled, poisson: OnceLock::new() })
    }

    /// From sparse 0-based entries (i, j, Ω_ij); the (j, i) entry is implied.
    pub fn from_sparse(model: AlgebroidModel, entries: &[(usize, usize, Expr)]) -> Result<SymplecticSection, HamError> {
        let mut comps = BTreeMap::new();
        for (i, j, e) in entries {
            if i == j {
                return Err(HamError::Shape(format!("diagonal entry Ω_{}{}", i + 1, j + 1)));
            }
            let key = vec![*i, *j];
            if comps.insert(key, e.clone()).is_some() {
                return Err(HamError::Shape(format!("duplicate entry Ω_{}{}", i + 1, j + 1)));
            }
        }
        let form = model.form(2, comps)?;
        SymplecticSection::new(model, form)
    }

    pub fn model(&self) -> &AlgebroidModel {
        &self.model
    }

    pub fn form(&self) -> &KFormField {
        &self.form
    }

    pub fn matrix(&self) -> &[Vec<Expr>] {
        &self.matrix
    }

    pub fn matrix_at(&self, x: &[f64]) -> Result<Mat, EvalError> {
        let n = self.model.rank();
        let vals: Vec<f64> = self.compiled.iter().map(|c| c.eval(x)).collect::<Result<_, _>>()?;
        Ok(Mat::from_fn(n, n, |i, j| vals[i * n + j]))
    }

    /// Π^{IJ} = −(Ω⁻¹)^{IJ}, computed once.
    pub fn poisson_tensor(&self) -> Result<&[Vec<Expr>], HamError> {
        let n = self.model.rank();
        let p = self.poisson.get_or_init(|| {
            let id: Vec<Vec<Expr>> =
                (0..n).map(|i| (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect()).collect();
            solve_exprs(&self.matrix, &id).map(|inv| inv.into_iter().map(|r| r.into_iter().map(|e| -e).collect()).collect())
        });
        p.as_deref().ok_or(HamError::SymbolicSingular)
    }

    /// Closedness and sampled nondegeneracy.
    pub fn check_invariants(&self, settings: &Settings) -> Result<Vec<Record>, HamError> {
        let d = self.model.d(&self.form)?;
        let exprs: Vec<Expr> = d.components().map(|(_, e)| e.clone()).collect();
        let mut out = vec![identity_record(
            "omega/closed",
            "closed-2-section",
            &exprs,
            &self.model.sample_ranges(),
            settings.seed,
            settings.samples,
            settings.tol.sampled_identity,
        )];
        let pts = self.model.sample_points(settings.seed, settings.samples);
        let mut worst = f64::INFINITY;
        for p in &pts {
            worst = worst.min(scaled_det(&self.matrix_at(p)?).abs());
        }
        if pts.is_empty() {
            worst = 0.0;
        }
        let tol = settings.tol.nondegenerate_det;
        out.push(
            Record::verdict("omega/nondegenerate", "nondegenerate-2-section", Sample::Sampled(pts.len()), worst, tol, worst > tol)
                .with_note("residual is the smallest row-scaled |det Ω|"),
        );
        Ok(out)
    }

    /// H_f with i_{H_f}Ω = Ω(H_f, ·) = d_A f.
    pub fn hamiltonian_section(&self, f: &Expr) -> Result<SectionField, HamError> {
        let pi = self.poisson_tensor()?;
        let n = self.model.rank();
        let df: Vec<Expr> = (0..n).map(|j| self.model.basis_anchor_apply(j, f)).collect();
        let comps = (0..n)
            .map(|i| (0..n).filter(|&j| !pi[i][j].is_zero() && !df[j].is_zero()).map(|j| &pi[i][j] * &df[j]).sum())
            .collect();
        Ok(self.model.section(comps)?)
    }

    /// Pointwise H from the values of d_A f at x.
    pub fn hamiltonian_at(&self, df: &[f64], x: &[f64]) -> Result<Vec<f64>, HamError> {
        let w = self.matrix_at(x)?;
        // Ωᵀ H = df.
        let lu = w.transpose().lu();
        let h = lu.solve(&DVector::from_column_slice(df)).ok_or_else(|| HamError::Singular(x.to_vec()))?;
        Ok(h.iter().copied().collect())
    }

    /// {f, g} = ρ(H_g)(f).
    pub fn base_poisson(&self, f: &Expr, g: &Expr) -> Result<Expr, HamError> {
        let h = self.hamiltonian_section(g)?;
        Ok(self.model.anchor_apply(&h, f)?)
    }

    /// ρ(H_f), the Hamiltonian vector field on the base.
    pub fn base_hamiltonian_field(&self, f: &Expr) -> Result<Vec<Expr>, HamError> {
        Ok(self.model.anchor_field(&self.hamiltonian_section(f)?)?)
    }

    /// Antisymmetry, constants and the Leibniz rule of the base bracket on random polynomials.
    pub fn check_base_poisson(&self, settings: &Settings) -> Result<Vec<Record>, HamError> {
        let mut s = Sampler::derived(settings.seed, "base-poisson");
        let coords = self.model.coords().to_vec();
        let (f, g, h) = (s.polynomial(&coords, 2), s.polynomial(&coords, 2), s.polynomial(&coords, 2));
        let ranges = self.model.sample_ranges();
        let rec = |id: &str, anchor: &str, e: Vec<Expr>| {
            identity_record(id, anchor, &e, &ranges, settings.seed, settings.samples, settings.tol.sampled_identity)
        };
        let fg = self.base_poisson(&f, &g)?;
        let gf = self.base_poisson(&g, &f)?;
        let leib = self.base_poisson(&(&f * &h), &g)? - (&f * self.base_poisson(&h, &g)? + &h * &fg);
        Ok(vec![
            rec("poisson/antisymmetry", "base-bracket-antisymmetric", vec![&fg + &gf]),
            rec("poisson/constant", "base-bracket-constant", vec![self.base_poisson(&f, &Expr::int(3))?]),
            rec("poisson/leibniz", "base-bracket-derivation", vec![leib]),
        ])
    }
}

fn fiber_polynomial(e: &Expr, y: &[String]) -> Result<(), HamError> {
    for v in y {
        let mut d = e.clone();
        let mut k = 0;
        while !d.is_zero() {
            if k > 12 || Expr::from_poly(d.denom().clone()).depends_on(v) {
                return Err(HamError::NonPolynomialFiber(v.clone()));
            }
            d = d.diff(v);
            k += 1;
        }
    }
    Ok(())
}

/// Linear Poisson bracket on A*:
/// {F,G} = −C_IJ^K y_K ∂_{y_I}F ∂_{y_J}G − ρ_I^i (∂_{y_I}F ∂_iG − ∂_iF ∂_{y_I}G).
pub fn linear_poisson(model: &AlgebroidModel, f: &Expr, g: &Expr) -> Result<Expr, HamError> {
    let (_, y) = dual_chart(model);
    fiber_polynomial(f, &y)?;
    fiber_polynomial(g, &y)?;
    let n = model.rank();
    let fy: Vec<Expr> = y.iter().map(|v| f.diff(v)).collect();
    let gy: Vec<Expr> = y.iter().map(|v| g.diff(v)).collect();
    let mut acc = Expr::zero();
    for i in 0..n {
        for j in 0..n {
            if fy[i].is_zero() || gy[j].is_zero() {
                continue;
            }
            let cy: Expr = (0..n).filter(|&k| !model.c(i, j, k).is_zero()).map(|k| model.c(i, j, k) * Expr::var(&y[k])).sum();
            if !cy.is_zero() {
                acc = acc - cy * &fy[i] * &gy[j];
            }
        }
        acc = acc - (&fy[i] * model.basis_anchor_apply(i, g) - model.basis_anchor_apply(i, f) * &gy[i]);
    }
    Ok(acc)
}

/// The three defining relations of the linear Poisson structure on random data.
pub fn check_linear_poisson(model: &AlgebroidModel, settings: &Settings) -> Result<Vec<Record>, HamError> {
    let mut s = Sampler::derived(settings.seed, "linear-poisson");
    let x = model.random_section(&mut s);
    let y = model.random_section(&mut s);
    let f = s.polynomial(model.coords(), 2);
    let h = s.polynomial(model.coords(), 2);
    let (xh, yh) = (linear_function_dual(model, &x), linear_function_dual(model, &y));
    let (coords, _) = dual_chart(model);
    let mut ranges = model.sample_ranges();
    for c in &coords {
        ranges.entry(c.clone()).or_insert((-2.0, 2.0));
    }
    let rec = |id: &str, anchor: &str, e: Vec<Expr>| {
        identity_record(id, anchor, &e, &ranges, settings.seed, settings.samples, settings.tol.sampled_identity)
    };
    let r1 = linear_poisson(model, &xh, &yh)? + linear_function_dual(model, &model.bracket(&x, &y)?);
    let r2 = linear_poisson(model, &xh, &f)? + model.anchor_apply(&x, &f)?;
    let r3 = linear_poisson(model, &f, &h)?;
    Ok(vec![
        rec("linear-poisson/linear-linear", "linear-poisson-on-linear-functions", vec![r1]),
        rec("linear-poisson/linear-basic", "linear-poisson-linear-and-basic", vec![r2]),
        rec("linear-poisson/basic-basic", "linear-poisson-basic-functions-commute", vec![r3]),
    ])
}

/// Hamiltonian vector field of F for the linear Poisson structure: H_F(G) = {G, F}.
pub fn linear_hamiltonian_field(model: &AlgebroidModel, f: &Expr) -> Result<Vec<Expr>, HamError> {
    let (coords, _) = dual_chart(model);
    coords.iter().map(|z| linear_poisson(model, &Expr::var(z), f)).collect()
}

/// The generator of ξ on A*, (ψ(ξ))^{*c}, is the Hamiltonian field of ψ(ξ)^.
pub fn check_dual_generators_hamiltonian(act: &LiftAction, settings: &Settings) -> Result<Record, HamError> {
    let model = act.model();
    let mut diff = Vec::new();
    for a in 0..act.dim() {
        let h = linear_hamiltonian_field(model, &linear_function_dual(model, act.psi(a)))?;
        let c = complete_lift_dual(model, act.psi(a))?;
        diff.extend(h.iter().zip(&c.comps).map(|(p, q)| p - q));
    }
    let (coords, _) = dual_chart(model);
    let mut ranges = model.sample_ranges();
    for c in &coords {
        ranges.entry(c.clone()).or_insert((-2.0, 2.0));
    }
    Ok(identity_record(
        "linear-poisson/dual-generator-hamiltonian",
        "dual-generator-is-hamiltonian",
        &diff,
        &ranges,
        settings.seed,
        settings.samples,
        settings.tol.sampled_identity,
    ))
}

/// J: M → g*, stored as its components J_a.
#[derive(Clone, Debug)]
pub struct MomentumMap {
    action: LiftAction,
    comps: Vec<Expr>,
    value: Vec<Compiled>,
    grad: Vec<Vec<Compiled>>,
}

impl MomentumMap {
    pub fn new(action: LiftAction, comps: Vec<Expr>) -> Result<MomentumMap, HamError> {
        if comps.len() != action.dim() {
            return Err(HamError::Shape(format!("momentum map needs {} components, got {}", action.dim(), comps.len())));
        }
        let coords = action.model().coords().to_vec();
        let value = comps.iter().map(|e| e.compile(&coords)).collect::<Result<_, _>>()?;
        let grad = comps
            .iter()
            .map(|e| coords.iter().map(|v| e.diff(v).compile(&coords)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        Ok(MomentumMap { action, comps, value, grad })
    }

    pub fn action(&self) -> &LiftAction {
        &self.action
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.value.iter().map(|c| c.eval(x)).collect()
    }

    /// ∂J_a/∂x^i as a d×m matrix.
    pub fn jacobian(&self, x: &[f64]) -> Result<Mat, EvalError> {
        let d = self.comps.len();
        let m = self.action.model().dim();
        let mut out = Mat::zeros(d, m);
        for a in 0..d {
            for i in 0..m {
                out[(a, i)] = self.grad[a][i].eval(x)?;
            }
        }
        Ok(out)
    }

    fn rho_at(&self, x: &[f64]) -> Result<Mat, EvalError> {
        let model = self.action.model();
        let (n, m) = (model.rank(), model.dim());
        let mut r = Mat::zeros(m, n);
        for big in 0..n {
            for i in 0..m {
                let e = model.rho(big, i);
                if !e.is_zero() {
                    r[(i, big)] = e.compile(model.coords())?.eval(x)?;
                }
            }
        }
        Ok(r)
    }

    /// T_xJ∘ρ_x as a d×n matrix.
    pub fn tj_rho(&self, x: &[f64]) -> Result<Mat, EvalError> {
        Ok(self.jacobian(x)? * self.rho_at(x)?)
    }

    /// J^T(a_x) = ((TJ∘ρ)(a), J(x)).
    pub fn j_t(&self, x: &[f64], a: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let first = self.tj_rho(x)? * DVector::from_column_slice(a);
        Ok((first.iter().copied().collect(), self.value(x)?))
    }

    /// Orthonormal basis of ker(T_xJ∘ρ_x) at a point of J⁻¹(μ).
    pub fn level_set_fiber(&self, mu: &[f64], x: &[f64], settings: &Settings) -> Result<Mat, HamError> {
        let r = level_residual(&self.value(x)?, mu);
        if r > settings.tol.level_set {
            return Err(HamError::OffLevelSet(r));
        }
        Ok(null_space(&self.tj_rho(x)?, settings.tol.svd_rel))
    }

    /// Kernels at several level-set points; errors on a rank jump.
    pub fn level_set_fibers(&self, mu: &[f64], pts: &[Vec<f64>], settings: &Settings) -> Result<Vec<Mat>, HamError> {
        let mut out: Vec<Mat> = Vec::with_capacity(pts.len());
        for p in pts {
            let k = self.level_set_fiber(mu, p, settings)?;
            if let Some(first) = out.first() {
                if first.ncols() != k.ncols() {
                    return Err(HamError::ConstantRank { expected: first.ncols(), got: k.ncols() });
                }
            }
            out.push(k);
        }
        Ok(out)
    }

    /// Points of J⁻¹(μ) by minimum-norm Gauss–Newton from seeded starts in the sample box.
    pub fn level_set_points(&self, mu: &[f64], count: usize, seed: u64, settings: &Settings) -> Vec<Vec<f64>> {
        let model = self.action.model();
        let bx = model.sample_box().to_vec();
        let guards = model.guards();
        let mut s = Sampler::derived(seed, "level-set");
        let mut out = Vec::with_capacity(count);
        let mut tries = 0;
        while out.len() < count && tries < 40 * count + 40 {
            tries += 1;
            let mut x = s.point_in(&bx);
            let mut ok = false;
            for _ in 0..60 {
                let Ok(v) = self.value(&x) else { break };
                let r: Vec<f64> = v.iter().zip(mu).map(|(a, b)| a - b).collect();
                if r.iter().map(|e| e.abs()).fold(0.0, f64::max) < 1e-13 {
                    ok = true;
                    break;
                }
                let Ok(jac) = self.jacobian(&x) else { break };
                let Some(step) = jac.clone().svd(true, true).solve(&DVector::from_column_slice(&r), 1e-12).ok() else { break };
                for (xi, si) in x.iter_mut().zip(step.iter()) {
                    *xi -= si;
                }
            }
            let inside = x.iter().zip(&bx).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
            let guarded = guards.iter().all(|g| g.eval(&x).is_ok_and(|v| v.is_finite()));
            if ok && inside && guarded && level_residual(&self.value(&x).unwrap_or_default(), mu) < settings.tol.level_set {
                out.push(x);
            }
        }
        out
    }

    /// Invariance of Ω, the momentum identity and sampled equivariance of J.
    pub fn check_hamiltonian_action(&self, omega: &SymplecticSection, settings: &Settings) -> Result<Vec<Record>, HamError> {
        let model = self.action.model();
        let d = self.action.dim();
        let ranges = model.sample_ranges();
        let tol = settings.tol.sampled_identity;
        let mut inv = Vec::new();
        let mut mom = Vec::new();
        for a in 0..d {
            let psi = self.action.psi(a);
            inv.extend(model.lie_derivative_form(psi, omega.form())?.components().map(|(_, e)| e.clone()).collect::<Vec<_>>());
            let lhs = model.interior(psi, omega.form())?;
            let rhs = model.d(&model.function(self.comps[a].clone()))?;
            mom.extend(lhs.sub(&rhs).components().map(|(_, e)| e.clone()).collect::<Vec<_>>());
        }
        let mut out = vec![
            identity_record("momentum/omega-invariant", "lie-derivative-of-omega-vanishes", &inv, &ranges, settings.seed, settings.samples, tol),
            identity_record("momentum/identity", "interior-psi-omega-is-dJ", &mom, &ranges, settings.seed, settings.samples, tol),
        ];
        out.push(self.check_equivariance(settings, settings.samples)?);
        Ok(out)
    }

    /// J(φ_g(x)) = Coad_g J(x) with g = exp(tη).
    pub fn check_equivariance(&self, settings: &Settings, count: usize) -> Result<Record, HamError> {
        let d = self.action.dim();
        if d == 0 {
            return Ok(Record::new("momentum/equivariance", "momentum-map-equivariant", Sample::NotApplicable, 0.0, settings.tol.flow));
        }
        let model = self.action.model();
        let mut s = Sampler::derived(settings.seed, "momentum-equivariance");
        let pts = model.sample_points(settings.seed ^ 0x3e, count);
        let mut worst = 0.0f64;
        for x in &pts {
            let g = GroupElement::exp(self.action.algebra(), &s.vector(d, -1.0, 1.0), s.uniform(-1.0, 1.0));
            let x1 = self.action.phi_base(&g, x, settings.step)?;
            let lhs = self.value(&x1)?;
            let rhs = g.coad(&self.value(x)?);
            worst = worst.max(lhs.iter().zip(&rhs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
        }
        Ok(Record::new("momentum/equivariance", "momentum-map-equivariant", Sample::Sampled(pts.len()), worst, settings.tol.flow))
    }

    /// J^T(Φ^T_{(g,ξ)} a) = Coad^{TG}_{(g,ξ)} J^T(a).
    pub fn check_jt_equivariance(&self, settings: &Settings, count: usize) -> Result<Record, HamError> {
        let d = self.action.dim();
        if d == 0 {
            return Ok(Record::new("momentum/jt-equivariance", "induced-momentum-equivariant", Sample::NotApplicable, 0.0, settings.tol.flow));
        }
        let model = self.action.model();
        let n = model.rank();
        let alg = self.action.algebra();
        let mut s = Sampler::derived(settings.seed, "jt-equivariance");
        let pts = model.sample_points(settings.seed ^ 0x47, count);
        let mut worst = 0.0f64;
        for x in &pts {
            let g = GroupElement::exp(alg, &s.vector(d, -1.0, 1.0), s.uniform(-1.0, 1.0));
            let e = TGElement::new(g, s.vector(d, -1.0, 1.0));
            let a = s.vector(n, -1.0, 1.0);
            let (x1, a1) = self.action.phi_t(&e, x, &a, settings.step)?;
            let lhs = self.j_t(&x1, &a1)?;
            let (m1, m2) = self.j_t(x, &a)?;
            let rhs = e.coad(alg, &m1, &m2);
            let r = lhs.0.iter().zip(&rhs.0).chain(lhs.1.iter().zip(&rhs.1)).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            worst = worst.max(r);
        }
        Ok(Record::new("momentum/jt-equivariance", "induced-momentum-equivariant", Sample::Sampled(pts.len()), worst, settings.tol.flow))
    }

    /// At level-set points: ker(TJ∘ρ) is the Ω-orthogonal of ψ(g), and
    /// ψ(g_μ) = ψ(g) ∩ ker(TJ∘ρ).
    pub fn check_level_set_lemmas(&self, omega: &SymplecticSection, mu: &[f64], pts: &[Vec<f64>], settings: &Settings) -> Result<Vec<Record>, HamError> {
        let rel = settings.tol.regular_rank_rel;
        let alg = self.action.algebra();
        let g_mu = alg.isotropy_subalgebra(mu, rel);
        let mut orth_ok = true;
        let mut iso_ok = true;
        for x in pts {
            let k = self.level_set_fiber(mu, x, settings)?;
            let psi = self.action.psi_matrix(x)?;
            let w = omega.matrix_at(x)?;
            let perp = null_space(&(psi.transpose() * &w), settings.tol.svd_rel);
            orth_ok &= same_subspace(&k, &perp, rel);
            let lhs = &psi * &g_mu;
            let rhs = intersection(&psi, &k, rel);
            iso_ok &= rank(&lhs, rel) == rhs.ncols() && same_subspace(&lhs, &rhs, rel);
        }
        let sample = Sample::Sampled(pts.len());
        let note = if pts.is_empty() { "no level-set points found" } else { "" };
        Ok(vec![
            Record::verdict("momentum/kernel-is-orthogonal", "kernel-equals-omega-orthogonal", sample.clone(), if orth_ok { 0.0 } else { 1.0 }, rel, orth_ok && !pts.is_empty())
                .with_note(note),
            Record::verdict("momentum/isotropy-intersection", "isotropy-image-is-intersection", sample, if iso_ok { 0.0 } else { 1.0 }, rel, iso_ok && !pts.is_empty())
                .with_note(note),
        ])
    }

    /// Jacobian rank d at level-set points.
    pub fn check_regular(&self, pts: &[Vec<f64>], settings: &Settings) -> Result<Record, HamError> {
        let d = self.action.dim();
        let mut min_rank = d;
        for x in pts {
            min_rank = min_rank.min(rank(&self.jacobian(x)?, settings.tol.regular_rank_rel));
        }
        Ok(Record::verdict(
            "momentum/regular-value",
            "regular-value",
            Sample::Sampled(pts.len()),
            (d - min_rank) as f64,
            settings.tol.regular_rank_rel,
            min_rank == d,
        )
        .with_note(format!("min Jacobian rank {min_rank} of {d}")))
    }
}

fn level_residual(v: &[f64], mu: &[f64]) -> f64 {
    v.iter().zip(mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::LieAlgebra;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// T(R²) seen as the tangent bundle of the (x, y) plane, Ω = e¹∧e².
    fn plane() -> (AlgebroidModel, SymplecticSection) {
        let rho = vec![vec![Expr::one(), Expr::zero()], vec![Expr::zero(), Expr::one()]];
        let m = AlgebroidModel::from_sparse(names(&["x", "y"]), 2, rho, &[]).unwrap();
        let w = SymplecticSection::from_sparse(m.clone(), &[(0, 1, Expr::one())]).unwrap();
        (m, w)
    }

    fn so3() -> AlgebroidModel {
        let e: Vec<_> = [(0, 1, 2), (1, 2, 0), (2, 0, 1)].iter().map(|&(i, j, k)| (i, j, k, Expr::one())).collect();
        AlgebroidModel::from_sparse(vec![], 3, vec![vec![]; 3], &e).unwrap()
    }

    #[test]
    fn gauss_jordan_inverts_symbolic_matrix() {
        let x = Expr::var("x");
        let a = vec![vec![x.clone(), Expr::one()], vec![Expr::zero(), x.clone()]];
        let id = vec![vec![Expr::one(), Expr::zero()], vec![Expr::zero(), Expr::one()]];
        let inv = solve_exprs(&a, &id).unwrap();
        assert_eq!(inv[0][1], -(x.powi(-2)));
        assert!(solve_exprs(&[vec![x.clone(), x.clone()], vec![Expr::one(), Expr::one()]], &id).is_none());
    }

    #[test]
    fn canonical_plane_hamiltonian() {
        // Ω = dx∧dy, Ω(H,·) = df gives ẋ = ∂f/∂y, ẏ = −∂f/∂x.
        let (_, w) = plane();
        let f = Expr::var("x").powi(2) * Expr::var("y");
        let h = w.hamiltonian_section(&f).unwrap();
        assert_eq!(h.comps(), &[Expr::var("x").powi(2), Expr::int(-2) * Expr::var("x") * Expr::var("y")]);
        assert!(w.hamiltonian_section(&Expr::int(5)).unwrap().is_zero());
        assert_eq!(w.base_poisson(&Expr::var("x"), &Expr::var("y")).unwrap(), Expr::one());
        let n = w.hamiltonian_at(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert!((n[0] - 2.0).abs() < 1e-14 && (n[1] + 1.0).abs() < 1e-14);
        let s = Settings::default();
        assert!(w.check_invariants(&s).unwrap().iter().all(|r| r.pass));
        assert!(w.check_base_poisson(&s).unwrap().iter().all(|r| r.pass));
    }

    #[test]
    fn lie_poisson_sign_on_so3() {
        let m = so3();
        let b = linear_poisson(&m, &Expr::var("y1"), &Expr::var("y2")).unwrap();
        assert_eq!(b, -Expr::var("y3"));
        assert!(check_linear_poisson(&m, &Settings::default()).unwrap().iter().all(|r| r.pass));
        let bad = Expr::var("y1").recip();
        assert!(matches!(linear_poisson(&m, &bad, &Expr::var("y2")), Err(HamError::NonPolynomialFiber(_))));
    }

    #[test]
    fn translation_momentum_on_plane() {
        // ψ(ξ) = e₁ translates x; i_{e₁}(e¹∧e²) = e² = d y, so J = y.
        let (m, w) = plane();
        let act = LiftAction::new(LieAlgebra::abelian(1), m.clone(), vec![vec![Expr::one(), Expr::zero()]], None, true).unwrap();
        let s = Settings::default();
        let j = MomentumMap::new(act.clone(), vec![Expr::var("y")]).unwrap();
        let recs = j.check_hamiltonian_action(&w, &s).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
        let bad = MomentumMap::new(act, vec![Expr::int(2) * Expr::var("y")]).unwrap();
        let recs = bad.check_hamiltonian_action(&w, &s).unwrap();
        let r = recs.iter().find(|r| r.id == "momentum/identity").unwrap();
        assert!(!r.pass);
        let pts = j.level_set_points(&[0.5], 5, 1, &s);
        assert_eq!(pts.len(), 5);
        for p in &pts {
            assert!((p[1] - 0.5).abs() < 1e-12);
            let k = j.level_set_fiber(&[0.5], p, &s).unwrap();
            assert!(same_subspace(&k, &Mat::from_row_slice(2, 1, &[1.0, 0.0]), 1e-10));
        }
        assert!(matches!(j.level_set_fiber(&[0.5], &[0.0, 0.0], &s), Err(HamError::OffLevelSet(_))));
        let l = j.check_level_set_lemmas(&w, &[0.5], &pts, &s).unwrap();
        assert!(l.iter().all(|r| r.pass), "{l:?}");
        let (a, b) = j.j_t(&[0.3, 0.5], &[0.0, 0.0]).unwrap();
        assert_eq!((a, b), (vec![0.0], vec![0.5]));
    }

    #[test]
    fn trivial_action_is_vacuous() {
        let (m, w) = plane();
        let j = MomentumMap::new(LiftAction::trivial(m), vec![]).unwrap();
        let recs = j.check_hamiltonian_action(&w, &Settings::default()).unwrap();
        assert!(recs.iter().all(|r| r.pass));
    }
}
