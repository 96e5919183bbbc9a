//! Vertical and complete lifts, actions by complete lifts, the induced
//! TG-action on A, and numerical flows.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::algebroid::{apply_vector, vector_commutator, AlgebroidError, AlgebroidModel, KFormField, SectionField};
use crate::config::Settings;
use crate::liegroup::{tg_bracket_expr, GroupElement, LieAlgebra, TGElement};
use crate::linalg::{rank, Mat};
use crate::report::{Record, Sample};
use crate::sampling::{identity_record, Sampler};
use crate::symexpr::{Compiled, EvalError, Expr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LiftError {
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("ψ is not an anti-morphism: ⟦ψ(ξ{a}), ψ(ξ{b})⟧ + c_ab^e ψ(ξe) = {residual}")]
    AntiMorphism { a: usize, b: usize, residual: String },
    #[error("declared generator of ξ{a} differs from ρ(ψ(ξ{a})) in component {i}")]
    Generator { a: usize, i: usize },
    #[error("flow left the domain of the field at time {time}: {source}")]
    Flow { time: f64, source: EvalError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bundle {
    A,
    ADual,
}

/// A vector field on the total space of A or A*, in bundle coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedVectorField {
    pub bundle: Bundle,
    pub coords: Vec<String>,
    pub comps: Vec<Expr>,
}

impl LiftedVectorField {
    pub fn apply(&self, f: &Expr) -> Expr {
        apply_vector(&self.comps, &self.coords, f)
    }

    pub fn bracket(&self, o: &LiftedVectorField) -> LiftedVectorField {
        assert_eq!(self.coords, o.coords, "fields live on different charts");
        LiftedVectorField { bundle: self.bundle, coords: self.coords.clone(), comps: vector_commutator(&self.comps, &o.comps, &self.coords) }
    }

    pub fn add(&self, o: &LiftedVectorField) -> LiftedVectorField {
        LiftedVectorField { bundle: self.bundle, coords: self.coords.clone(), comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &LiftedVectorField) -> LiftedVectorField {
        LiftedVectorField { bundle: self.bundle, coords: self.coords.clone(), comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, f: &Expr) -> LiftedVectorField {
        LiftedVectorField { bundle: self.bundle, coords: self.coords.clone(), comps: self.comps.iter().map(|a| a * f).collect() }
    }

    pub fn compile(&self) -> Result<CompiledField, EvalError> {
        CompiledField::new(&self.comps, &self.coords)
    }
}

/// Vector field components compiled over a fixed coordinate order.
#[derive(Clone, Debug)]
pub struct CompiledField {
    comps: Vec<Compiled>,
}

impl CompiledField {
    pub fn new(comps: &[Expr], coords: &[String]) -> Result<CompiledField, EvalError> {
        Ok(CompiledField { comps: comps.iter().map(|c| c.compile(coords)).collect::<Result<_, _>>()? })
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.comps.iter().map(|c| c.eval(p)).collect()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }
}

/// Fixed-step RK4 from `p0` over time `t`; the step count is ⌈|t|/step⌉.
pub fn rk4<F>(field: F, p0: &[f64], t: f64, step: f64) -> Result<Vec<f64>, LiftError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, EvalError>,
{
    if t == 0.0 {
        return Ok(p0.to_vec());
    }
    let n = (t.abs() / step.abs()).ceil().max(1.0) as usize;
    let h = t / n as f64;
    let mut p = p0.to_vec();
    let mut tmp = vec![0.0; p.len()];
    for k in 0..n {
        let time = k as f64 * h;
        let wrap = |e| LiftError::Flow { time, source: e };
        let k1 = field(&p).map_err(wrap)?;
        for i in 0..p.len() {
            tmp[i] = p[i] + 0.5 * h * k1[i];
        }
        let k2 = field(&tmp).map_err(wrap)?;
        for i in 0..p.len() {
            tmp[i] = p[i] + 0.5 * h * k2[i];
        }
        let k3 = field(&tmp).map_err(wrap)?;
        for i in 0..p.len() {
            tmp[i] = p[i] + h * k3[i];
        }
        let k4 = field(&tmp).map_err(wrap)?;
        for i in 0..p.len() {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(LiftError::Flow { time: time + h, source: EvalError::DivisionByZero("non-finite state".into()) });
        }
    }
    Ok(p)
}

/// Time-`t` flow of a compiled field.
pub fn flow(field: &CompiledField, p0: &[f64], t: f64, step: f64) -> Result<Vec<f64>, LiftError> {
    rk4(|p| field.eval(p), p0, t, step)
}

/// Names `prefix1..prefixN`, lengthening the prefix until none collides with the chart.
pub fn fresh_names(prefix: &str, n: usize, taken: &[String]) -> Vec<String> {
    let mut p = prefix.to_string();
    loop {
        let names: Vec<String> = (1..=n).map(|i| format!("{p}{i}")).collect();
        if names.iter().all(|s| !taken.contains(s)) {
            return names;
        }
        p.push_str(prefix);
    }
}

/// Chart (x, v) on A.
pub fn a_chart(model: &AlgebroidModel) -> (Vec<String>, Vec<String>) {
    let v = fresh_names("v", model.rank(), model.coords());
    let mut all = model.coords().to_vec();
    all.extend(v.iter().cloned());
    (all, v)
}

/// Chart (x, y) on A*.
pub fn dual_chart(model: &AlgebroidModel) -> (Vec<String>, Vec<String>) {
    let y = fresh_names("y", model.rank(), model.coords());
    let mut all = model.coords().to_vec();
    all.extend(y.iter().cloned());
    (all, y)
}

pub fn vertical_lift(model: &AlgebroidModel, x: &SectionField) -> LiftedVectorField {
    let (coords, _) = a_chart(model);
    let mut comps = vec![Expr::zero(); model.dim()];
    comps.extend(x.comps().iter().cloned());
    LiftedVectorField { bundle: Bundle::A, coords, comps }
}

/// X^c = ρ(X) + (ρ_J^i ∂_i X^I − X^K C_KJ^I) v^J ∂/∂v^I.
pub fn complete_lift_a(model: &AlgebroidModel, x: &SectionField) -> Result<LiftedVectorField, LiftError> {
    let (coords, v) = a_chart(model);
    let n = model.rank();
    let mut comps = model.anchor_field(x)?;
    for i in 0..n {
        let mut acc = Expr::zero();
        for j in 0..n {
            let mut coef = model.basis_anchor_apply(j, x.comp(i));
            for k in 0..n {
                let c = model.c(k, j, i);
                if !c.is_zero() && !x.comp(k).is_zero() {
                    coef = coef - x.comp(k) * c;
                }
            }
            if !coef.is_zero() {
                acc = acc + coef * Expr::var(&v[j]);
            }
        }
        comps.push(acc);
    }
    Ok(LiftedVectorField { bundle: Bundle::A, coords, comps })
}

/// X^{*c} = ρ(X) − (ρ_I^i ∂_i X^K + C_IJ^K X^J) y_K ∂/∂y_I.
pub fn complete_lift_dual(model: &AlgebroidModel, x: &SectionField) -> Result<LiftedVectorField, LiftError> {
    let (coords, y) = dual_chart(model);
    let n = model.rank();
    let mut comps = model.anchor_field(x)?;
    for i in 0..n {
        let mut acc = Expr::zero();
        for k in 0..n {
            let mut coef = model.basis_anchor_apply(i, x.comp(k));
            for j in 0..n {
                let c = model.c(i, j, k);
                if !c.is_zero() && !x.comp(j).is_zero() {
                    coef = coef + c * x.comp(j);
                }
            }
            if !coef.is_zero() {
                acc = acc - coef * Expr::var(&y[k]);
            }
        }
        comps.push(acc);
    }
    Ok(LiftedVectorField { bundle: Bundle::ADual, coords, comps })
}

/// α̂ = α_I v^I on A.
pub fn linear_function_a(model: &AlgebroidModel, alpha: &KFormField) -> Expr {
    let (_, v) = a_chart(model);
    (0..model.rank()).map(|i| alpha.get(&[i]) * Expr::var(&v[i])).sum()
}

/// Ŷ = Y^K y_K on A*.
pub fn linear_function_dual(model: &AlgebroidModel, x: &SectionField) -> Expr {
    let (_, y) = dual_chart(model);
    x.comps().iter().zip(&y).map(|(c, yk)| c * Expr::var(yk)).sum()
}

fn chart_ranges(model: &AlgebroidModel, coords: &[String]) -> BTreeMap<String, (f64, f64)> {
    let mut r = model.sample_ranges();
    for c in coords {
        r.entry(c.clone()).or_insert((-2.0, 2.0));
    }
    r
}

/// Bracket relations of lifts and their pairing identities on random sections.
pub fn check_cv_relations(model: &AlgebroidModel, settings: &Settings) -> Result<Vec<Record>, LiftError> {
    let mut s = Sampler::derived(settings.seed, "cv");
    let x = model.random_section(&mut s);
    let y = model.random_section(&mut s);
    let alpha = model.random_form(1, &mut s);
    let (coords, _) = a_chart(model);
    let (dcoords, _) = dual_chart(model);
    let ranges = chart_ranges(model, &coords);
    let dranges = chart_ranges(model, &dcoords);
    let tol = settings.tol.sampled_identity;
    let rec = |id: &str, anchor: &str, e: Vec<Expr>, r: &BTreeMap<String, (f64, f64)>| {
        identity_record(id, anchor, &e, r, settings.seed, settings.samples, tol)
    };
    let xy = model.bracket(&x, &y)?;
    let (xc, yc) = (complete_lift_a(model, &x)?, complete_lift_a(model, &y)?);
    let (xv, yv) = (vertical_lift(model, &x), vertical_lift(model, &y));
    let mut out = vec![
        rec("lifts/complete-complete", "complete-lift-bracket", xc.bracket(&yc).sub(&complete_lift_a(model, &xy)?).comps, &ranges),
        rec("lifts/complete-vertical", "complete-vertical-bracket", xc.bracket(&yv).sub(&vertical_lift(model, &xy)).comps, &ranges),
        rec("lifts/vertical-vertical", "vertical-lifts-commute", xv.bracket(&yv).comps, &ranges),
    ];
    let lhs = xc.apply(&linear_function_a(model, &alpha));
    let rhs = linear_function_a(model, &model.lie_derivative_form(&x, &alpha)?);
    out.push(rec("lifts/complete-on-linear", "complete-lift-on-linear-functions", vec![lhs - rhs], &ranges));
    let xs = complete_lift_dual(model, &x)?;
    let lhs = xs.apply(&linear_function_dual(model, &y));
    out.push(rec("lifts/dual-complete-on-linear", "dual-complete-lift-on-linear-functions", vec![lhs - linear_function_dual(model, &xy)], &dranges));
    Ok(out)
}

/// Numerically: the X^{*c}-flow at time s is the dual of the X^c-flow at −s.
pub fn check_flow_duality(model: &AlgebroidModel, x: &SectionField, s_time: f64, settings: &Settings, count: usize) -> Result<Record, LiftError> {
    let n = model.rank();
    let m = model.dim();
    let xc = complete_lift_a(model, x)?.compile().map_err(|e| LiftError::Flow { time: 0.0, source: e })?;
    let xs = complete_lift_dual(model, x)?.compile().map_err(|e| LiftError::Flow { time: 0.0, source: e })?;
    let mut s = Sampler::derived(settings.seed, "flow-duality");
    let pts = model.sample_points(settings.seed ^ 0x5eed, count);
    let mut worst = 0.0f64;
    for x0 in pts {
        let y0 = s.vector(n, -2.0, 2.0);
        let mut p = x0.clone();
        p.extend(&y0);
        let q = flow(&xs, &p, s_time, settings.step)?;
        let xs_base = &q[..m];
        for j in 0..n {
            let mut a = xs_base.to_vec();
            a.extend((0..n).map(|k| if k == j { 1.0 } else { 0.0 }));
            let back = flow(&xc, &a, -s_time, settings.step)?;
            let w = &back[m..];
            let predicted: f64 = y0.iter().zip(w).map(|(a, b)| a * b).sum();
            worst = worst.max((predicted - q[m + j]).abs());
            for i in 0..m {
                worst = worst.max((back[i] - x0[i]).abs());
            }
        }
    }
    Ok(Record::new("lifts/flow-duality", "dual-complete-lift-flow", Sample::Sampled(count), worst, settings.tol.flow))
}

/// An action by complete lifts: ψ: g → Γ(A).
#[derive(Clone, Debug)]
pub struct LiftAction {
    algebra: LieAlgebra,
    model: AlgebroidModel,
    psi: Vec<SectionField>,
    generators: Vec<Vec<Expr>>,
    declared_generators: Option<Vec<Vec<Expr>>>,
    free: bool,
    compiled: Option<ActionFlows>,
}

#[derive(Clone, Debug)]
struct ActionFlows {
    lifts: Vec<CompiledField>,
    psi: Vec<CompiledField>,
    base: Vec<CompiledField>,
    tangent: Vec<CompiledField>,
}

impl LiftAction {
    /// Builds the action without checking its invariants; see [`LiftAction::validated`].
    pub fn new(
        algebra: LieAlgebra,
        model: AlgebroidModel,
        psi_rows: Vec<Vec<Expr>>,
        declared_generators: Option<Vec<Vec<Expr>>>,
        free: bool,
    ) -> Result<LiftAction, LiftError> {
        if psi_rows.len() != algebra.dim() {
            return Err(LiftError::Shape(format!("ψ needs {} rows, got {}", algebra.dim(), psi_rows.len())));
        }
        let psi: Vec<SectionField> = psi_rows.into_iter().map(|r| model.section(r)).collect::<Result<_, _>>()?;
        if let Some(g) = &declared_generators {
            if g.len() != algebra.dim() || g.iter().any(|r| r.len() != model.dim()) {
                return Err(LiftError::Shape("declared generators must be d rows of m entries".into()));
            }
        }
        let generators = psi.iter().map(|p| model.anchor_field(p)).collect::<Result<_, _>>()?;
        let mut act = LiftAction { algebra, model, psi, generators, declared_generators, free, compiled: None };
        act.compiled = act.compile().ok();
        Ok(act)
    }

    /// The trivial action of the zero-dimensional group.
    pub fn trivial(model: AlgebroidModel) -> LiftAction {
        LiftAction::new(LieAlgebra::abelian(0), model, vec![], None, true).expect("empty action")
    }

    fn compile(&self) -> Result<ActionFlows, LiftError> {
        let (coords, _) = a_chart(&self.model);
        let err = |e| LiftError::Flow { time: 0.0, source: e };
        let lifts = self
            .psi
            .iter()
            .map(|p| complete_lift_a(&self.model, p).and_then(|l| l.compile().map_err(err)))
            .collect::<Result<_, _>>()?;
        let psi = self.psi.iter().map(|p| CompiledField::new(p.comps(), self.model.coords()).map_err(err)).collect::<Result<_, _>>()?;
        let base = self.generators.iter().map(|g| CompiledField::new(g, self.model.coords()).map_err(err)).collect::<Result<_, _>>()?;
        let _ = coords;
        let w = fresh_names("w", self.model.dim(), self.model.coords());
        let mut tcoords = self.model.coords().to_vec();
        tcoords.extend(w.iter().cloned());
        let tangent = self
            .generators
            .iter()
            .map(|g| {
                let mut comps = g.clone();
                comps.extend(g.iter().map(|gi| self.model.coords().iter().zip(&w).map(|(x, wj)| gi.diff(x) * Expr::var(wj)).sum::<Expr>()));
                CompiledField::new(&comps, &tcoords).map_err(err)
            })
            .collect::<Result<_, _>>()?;
        Ok(ActionFlows { lifts, psi, base, tangent })
    }

    fn flows(&self) -> &ActionFlows {
        self.compiled.as_ref().expect("action data compiles over the chart")
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn model(&self) -> &AlgebroidModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn psi(&self, a: usize) -> &SectionField {
        &self.psi[a]
    }

    pub fn psi_all(&self) -> &[SectionField] {
        &self.psi
    }

    pub fn free(&self) -> bool {
        self.free
    }

    /// ξ_M = ρ(ψ(ξ_a)).
    pub fn generator(&self, a: usize) -> &[Expr] {
        &self.generators[a]
    }

    /// ψ(ξ) for symbolic coefficients.
    pub fn psi_of(&self, xi: &[Expr]) -> SectionField {
        let mut acc = self.model.zero_section();
        for (a, c) in xi.iter().enumerate() {
            if !c.is_zero() {
                acc = acc.add(&self.psi[a].scale(c));
            }
        }
        acc
    }

    /// Matrix [ψ_a^I(x)] with columns ψ(ξ_a).
    pub fn psi_matrix(&self, x: &[f64]) -> Result<Mat, EvalError> {
        let n = self.model.rank();
        let cols: Vec<Vec<f64>> = self.flows().psi.iter().map(|c| c.eval(x)).collect::<Result<_, _>>()?;
        Ok(Mat::from_fn(n, self.dim(), |i, a| cols[a][i]))
    }

    pub fn psi_at(&self, xi: &[f64], x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let m = self.psi_matrix(x)?;
        Ok((m * nalgebra::DVector::from_column_slice(xi)).iter().copied().collect())
    }

    /// (ξ,η)_A = ψ(ξ)^c + ψ(η)^v.
    pub fn action_infinitesimal(&self, xi: &[Expr], eta: &[Expr]) -> Result<LiftedVectorField, LiftError> {
        let c = complete_lift_a(&self.model, &self.psi_of(xi))?;
        Ok(c.add(&vertical_lift(&self.model, &self.psi_of(eta))))
    }

    /// φ_g on the base, applying the last factor of the word first.
    pub fn phi_base(&self, g: &GroupElement, x: &[f64], step: f64) -> Result<Vec<f64>, LiftError> {
        let base = &self.flows().base;
        let mut p = x.to_vec();
        for (eta, t) in g.word().iter().rev() {
            p = rk4(|q| combine(base, eta, q), &p, *t, step)?;
        }
        Ok(p)
    }

    /// Tφ_g on TM in coordinates (x, w).
    pub fn phi_tangent(&self, g: &GroupElement, x: &[f64], w: &[f64], step: f64) -> Result<(Vec<f64>, Vec<f64>), LiftError> {
        let tangent = &self.flows().tangent;
        let m = self.model.dim();
        let mut p = x.to_vec();
        p.extend_from_slice(w);
        for (eta, t) in g.word().iter().rev() {
            p = rk4(|q| combine(tangent, eta, q), &p, *t, step)?;
        }
        let w = p.split_off(m);
        Ok((p, w))
    }

    /// Φ_g on A in coordinates (x, v).
    pub fn phi(&self, g: &GroupElement, x: &[f64], v: &[f64], step: f64) -> Result<(Vec<f64>, Vec<f64>), LiftError> {
        let lifts = &self.flows().lifts;
        let m = self.model.dim();
        let mut p = x.to_vec();
        p.extend_from_slice(v);
        for (eta, t) in g.word().iter().rev() {
            p = rk4(|q| combine(lifts, eta, q), &p, *t, step)?;
        }
        let v = p.split_off(m);
        Ok((p, v))
    }

    /// Φ^T((g,ξ), a_x) = Φ_g(a_x + ψ(ξ)(x)).
    pub fn phi_t(&self, e: &TGElement, x: &[f64], a: &[f64], step: f64) -> Result<(Vec<f64>, Vec<f64>), LiftError> {
        let shift = self.psi_at(&e.xi, x).map_err(|s| LiftError::Flow { time: 0.0, source: s })?;
        let moved: Vec<f64> = a.iter().zip(&shift).map(|(p, q)| p + q).collect();
        self.phi(&e.g, x, &moved, step)
    }

    /// Symbolic invariants: anti-morphism, declared generators.
    pub fn validated(self) -> Result<LiftAction, LiftError> {
        let d = self.dim();
        for a in 0..d {
            for b in a + 1..d {
                let r = self.anti_morphism_residual(a, b)?;
                if let Some((_, e)) = r.iter().enumerate().find(|(_, e)| !e.is_identically_zero()) {
                    return Err(LiftError::AntiMorphism { a: a + 1, b: b + 1, residual: e.to_string() });
                }
            }
        }
        if let Some(g) = &self.declared_generators {
            for (a, row) in g.iter().enumerate() {
                for (i, e) in row.iter().enumerate() {
                    if !(e - &self.generators[a][i]).is_identically_zero() {
                        return Err(LiftError::Generator { a: a + 1, i: i + 1 });
                    }
                }
            }
        }
        Ok(self)
    }

    /// ⟦ψ(ξa), ψ(ξb)⟧ + c_ab^e ψ(ξe).
    pub fn anti_morphism_residual(&self, a: usize, b: usize) -> Result<Vec<Expr>, LiftError> {
        let br = self.model.bracket(&self.psi[a], &self.psi[b])?;
        let mut acc = br;
        for e in 0..self.dim() {
            let c = self.algebra.c(a, b, e);
            if !c.is_zero() {
                acc = acc.add(&self.psi[e].scale(c));
            }
        }
        Ok(acc.comps().to_vec())
    }

    /// Invariant records: anti-morphism, ρ∘ψ, ψ^{cv} bracket reversal, injectivity.
    pub fn check_invariants(&self, settings: &Settings) -> Result<Vec<Record>, LiftError> {
        let d = self.dim();
        let ranges = self.model.sample_ranges();
        let tol = settings.tol.sampled_identity;
        let mut anti = Vec::new();
        for a in 0..d {
            for b in 0..d {
                anti.extend(self.anti_morphism_residual(a, b)?);
            }
        }
        let mut out = vec![identity_record("action/anti-morphism", "psi-anti-morphism", &anti, &ranges, settings.seed, settings.samples, tol)];
        if let Some(g) = &self.declared_generators {
            let diff: Vec<Expr> = g.iter().zip(&self.generators).flat_map(|(r, s)| r.iter().zip(s).map(|(a, b)| a - b)).collect();
            out.push(identity_record("action/generators", "generator-is-anchor-of-psi", &diff, &ranges, settings.seed, settings.samples, tol));
        }
        // Lift to g×g: [(u)_A, (w)_A] + ([u,w])_A = 0 on basis pairs.
        let (coords, _) = a_chart(&self.model);
        let aranges = chart_ranges(&self.model, &coords);
        let basis = |k: usize| -> (Vec<Expr>, Vec<Expr>) {
            let mut xi = vec![Expr::zero(); d];
            let mut eta = vec![Expr::zero(); d];
            if k < d {
                xi[k] = Expr::one();
            } else {
                eta[k - d] = Expr::one();
            }
            (xi, eta)
        };
        let mut rev = Vec::new();
        for u in 0..2 * d {
            for w in u + 1..2 * d {
                let (xu, eu) = basis(u);
                let (xw, ew) = basis(w);
                let lu = self.action_infinitesimal(&xu, &eu)?;
                let lw = self.action_infinitesimal(&xw, &ew)?;
                let (bx, be) = tg_bracket_expr(&self.algebra, (&xu, &eu), (&xw, &ew));
                let lb = self.action_infinitesimal(&bx, &be)?;
                rev.extend(lu.bracket(&lw).add(&lb).comps);
            }
        }
        out.push(identity_record("action/tg-lift-reverses-bracket", "psi-cv-bracket", &rev, &aranges, settings.seed, settings.samples, tol));
        if self.free && d > 0 {
            let pts = self.model.sample_points(settings.seed, settings.samples);
            let mut worst_gap = f64::INFINITY;
            let mut ok = true;
            for p in &pts {
                let m = self.psi_matrix(p).map_err(|e| LiftError::Flow { time: 0.0, source: e })?;
                let sv = m.clone().svd(false, false).singular_values;
                let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
                let smax = sv.iter().copied().fold(0.0, f64::max);
                worst_gap = worst_gap.min(if smax > 0.0 { smin / smax } else { 0.0 });
                ok &= rank(&m, settings.tol.regular_rank_rel) == d;
            }
            out.push(
                Record::verdict("action/psi-injective", "psi-fiberwise-injective", Sample::Sampled(pts.len()), worst_gap, settings.tol.regular_rank_rel, ok)
                    .with_note("residual is the smallest relative singular value"),
            );
        }
        Ok(out)
    }

    /// Φ_g(ψ(Ad_{g⁻¹}ξ)(x)) = ψ(ξ)(φ_g(x)) for g = exp(tη), over sampled (t, η, ξ, x).
    pub fn check_psi_equivariance(&self, settings: &Settings, count: usize) -> Result<Record, LiftError> {
        let d = self.dim();
        if d == 0 {
            return Ok(Record::new("action/psi-equivariance", "psi-equivariance", Sample::NotApplicable, 0.0, settings.tol.flow));
        }
        let mut s = Sampler::derived(settings.seed, "psi-equivariance");
        let pts = self.model.sample_points(settings.seed ^ 0xe9, count);
        let mut worst = 0.0f64;
        let mut worst_pt = Vec::new();
        for x in &pts {
            let t = s.uniform(-1.0, 1.0);
            let eta = s.vector(d, -1.0, 1.0);
            let xi = s.vector(d, -1.0, 1.0);
            let g = GroupElement::exp(&self.algebra, &eta, t);
            let start = self.psi_at(&g.adjoint_inv(&xi), x).map_err(|e| LiftError::Flow { time: 0.0, source: e })?;
            let (x1, v1) = self.phi(&g, x, &start, settings.step)?;
            let expect = self.psi_at(&xi, &x1).map_err(|e| LiftError::Flow { time: t, source: e })?;
            let r = v1.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if r >= worst {
                worst = r;
                worst_pt = x.clone();
            }
        }
        let _ = worst_pt;
        Ok(Record::new("action/psi-equivariance", "psi-equivariance", Sample::Sampled(pts.len()), worst, settings.tol.flow))
    }

    /// Φ^T(a·b, p) = Φ^T(a, Φ^T(b, p)) on random inputs.
    pub fn check_phi_t_group_law(&self, settings: &Settings, count: usize) -> Result<Record, LiftError> {
        let d = self.dim();
        let n = self.model.rank();
        if d == 0 {
            return Ok(Record::new("action/tg-group-law", "tg-action-group-law", Sample::NotApplicable, 0.0, settings.tol.flow));
        }
        let mut s = Sampler::derived(settings.seed, "phi-t");
        let pts = self.model.sample_points(settings.seed ^ 0x77, count);
        let mut worst = 0.0f64;
        for x in &pts {
            let elem = |s: &mut Sampler| {
                let g = GroupElement::exp(&self.algebra, &s.vector(d, -1.0, 1.0), s.uniform(-0.7, 0.7));
                TGElement::new(g, s.vector(d, -1.0, 1.0))
            };
            let a = elem(&mut s);
            let b = elem(&mut s);
            let v = s.vector(n, -1.0, 1.0);
            let (x1, v1) = self.phi_t(&a.mul(&b), x, &v, settings.step)?;
            let (xb, vb) = self.phi_t(&b, x, &v, settings.step)?;
            let (x2, v2) = self.phi_t(&a, &xb, &vb, settings.step)?;
            let r = x1.iter().zip(&x2).chain(v1.iter().zip(&v2)).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            worst = worst.max(r);
        }
        Ok(Record::new("action/tg-group-law", "tg-action-group-law", Sample::Sampled(pts.len()), worst, settings.tol.flow))
    }
}

fn combine(fields: &[CompiledField], coef: &[f64], p: &[f64]) -> Result<Vec<f64>, EvalError> {
    let mut out = vec![0.0; p.len()];
    for (f, &c) in fields.iter().zip(coef) {
        if c == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(f.eval(p)?) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// Well-definedness of F([(ξ, v_x)]) = [v_x + ξ_M]_G on an action algebroid g × TM.
///
/// `g_slots` are the fiber indices of the g factor, the remaining ones are TM.
/// Classes in TM/G are compared through coefficients on an invariant frame
/// of vector fields together with invariant base coordinates.
pub fn check_atiyah_well_defined(
    act: &LiftAction,
    g_slots: &[usize],
    frame: &[Vec<Expr>],
    invariants: &[Expr],
    settings: &Settings,
    count: usize,
) -> Result<Record, LiftError> {
    let model = act.model();
    let n = model.rank();
    let m = model.dim();
    let d = act.dim();
    let tm_slots: Vec<usize> = (0..n).filter(|i| !g_slots.contains(i)).collect();
    if g_slots.len() != d || tm_slots.len() != m {
        return Err(LiftError::Shape("Atiyah slots must split the fiber as g × TM".into()));
    }
    let err = |e| LiftError::Flow { time: 0.0, source: e };
    let frame_c: Vec<CompiledField> = frame.iter().map(|f| CompiledField::new(f, model.coords()).map_err(err)).collect::<Result<_, _>>()?;
    let inv_c = CompiledField::new(invariants, model.coords()).map_err(err)?;
    let base = &act.flows().base;
    // F(a) at x: TM part plus the generator of the g part.
    let f_of = |x: &[f64], a: &[f64]| -> Result<Vec<f64>, LiftError> {
        let mut v: Vec<f64> = tm_slots.iter().map(|&i| a[i]).collect();
        for (k, &slot) in g_slots.iter().enumerate() {
            let gk = base[k].eval(x).map_err(err)?;
            for i in 0..m {
                v[i] += a[slot] * gk[i];
            }
        }
        Ok(v)
    };
    let class = |x: &[f64], v: &[f64]| -> Result<Vec<f64>, LiftError> {
        let cols: Vec<Vec<f64>> = frame_c.iter().map(|f| f.eval(x)).collect::<Result<_, _>>().map_err(err)?;
        let fm = Mat::from_fn(m, cols.len(), |i, k| cols[k][i]);
        let coef = fm.svd(true, true).solve(&nalgebra::DVector::from_column_slice(v), 1e-14).expect("frame solve");
        let mut out: Vec<f64> = coef.iter().copied().collect();
        out.extend(inv_c.eval(x).map_err(err)?);
        Ok(out)
    };
    let mut s = Sampler::derived(settings.seed, "atiyah");
    let pts = model.sample_points(settings.seed ^ 0xa7, count);
    let mut worst = 0.0f64;
    for x in &pts {
        let a = s.vector(n, -1.0, 1.0);
        let g = GroupElement::exp(act.algebra(), &s.vector(d, -1.0, 1.0), s.uniform(-0.7, 0.7));
        let e = TGElement::new(g, s.vector(d, -1.0, 1.0));
        let (x1, a1) = act.phi_t(&e, x, &a, settings.step)?;
        let c0 = class(x, &f_of(x, &a)?)?;
        let c1 = class(&x1, &f_of(&x1, &a1)?)?;
        worst = worst.max(c0.iter().zip(&c1).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
    }
    Ok(Record::new("action/atiyah-well-defined", "atiyah-map-well-defined", Sample::Sampled(pts.len()), worst, settings.tol.orbit_invariance))
}
