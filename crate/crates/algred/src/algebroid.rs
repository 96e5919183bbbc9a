//! Lie algebroids over a single chart.
//!
//! A model is the data (coords, rank, ρ_I^i, C_IJ^K). Sections, forms and
//! multisections carry the id of the model that created them and every
//! operation rejects foreign inputs. Forms are stored by their values on
//! increasing tuples of basis sections, so `(e^1∧e^2)(e_1,e_2) = 1`.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::config::Settings;
use crate::report::Record;
use crate::sampling::{identity_record, Sampler};
use crate::symexpr::{Compiled, Expr, Role, VarEnv};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebroidError {
    #[error("operands belong to different models")]
    ModelMismatch,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("structure functions not antisymmetric at C_{i}{j}^{k}: {residual}")]
    NotAntisymmetric { i: usize, j: usize, k: usize, residual: String },
    #[error("conflicting structure function entries for C_{i}{j}^{k}")]
    Conflict { i: usize, j: usize, k: usize },
    #[error("expression `{expr}` uses `{var}`, which is not a chart coordinate")]
    ForeignVariable { expr: String, var: String },
    #[error("interior product needs degree at least 1")]
    InteriorOfFunction,
    #[error("degree {degree} exceeds rank {rank}")]
    Degree { degree: usize, rank: usize },
    #[error("invalid variable environment: {0}")]
    Env(String),
}

#[derive(Clone, Debug)]
pub struct AlgebroidModel {
    id: u64,
    coords: Vec<String>,
    env: VarEnv,
    rank: usize,
    labels: Vec<String>,
    rho: Vec<Vec<Expr>>,
    c: Vec<Vec<Vec<Expr>>>,
    sample_box: Vec<(f64, f64)>,
}

/// Alternating tensor stored on strictly increasing index tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Alt {
    degree: usize,
    comps: BTreeMap<Vec<usize>, Expr>,
}

/// Sort `idx` ascending; returns the permutation sign, or `None` on a repeat.
pub fn sort_with_sign(idx: &[usize]) -> Option<(Vec<usize>, i64)> {
    let mut v = idx.to_vec();
    let mut sign = 1;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((v, sign))
    }
}

/// Strictly increasing k-subsets of 0..n.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

impl Alt {
    fn new(degree: usize) -> Alt {
        Alt { degree, comps: BTreeMap::new() }
    }

    fn get(&self, idx: &[usize]) -> Expr {
        debug_assert_eq!(idx.len(), self.degree);
        match sort_with_sign(idx) {
            None => Expr::zero(),
            Some((s, sign)) => match self.comps.get(&s) {
                None => Expr::zero(),
                Some(e) if sign > 0 => e.clone(),
                Some(e) => -e,
            },
        }
    }

    fn set_sorted(&mut self, idx: Vec<usize>, e: Expr) {
        if e.is_zero() {
            self.comps.remove(&idx);
        } else {
            self.comps.insert(idx, e);
        }
    }

    fn add(&self, o: &Alt) -> Alt {
        let mut r = self.clone();
        for (k, v) in &o.comps {
            let nv = r.get(k) + v;
            r.set_sorted(k.clone(), nv);
        }
        r
    }

    fn scale(&self, f: &Expr) -> Alt {
        let mut r = Alt::new(self.degree);
        for (k, v) in &self.comps {
            r.set_sorted(k.clone(), v * f);
        }
        r
    }
}

/// A section X = X^I e_I.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionField {
    model: u64,
    comps: Vec<Expr>,
}

impl SectionField {
    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn comp(&self, i: usize) -> &Expr {
        &self.comps[i]
    }

    pub fn model_id(&self) -> u64 {
        self.model
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Expr::is_zero)
    }

    pub fn add(&self, o: &SectionField) -> SectionField {
        SectionField { model: self.model, comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &SectionField) -> SectionField {
        SectionField { model: self.model, comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, f: &Expr) -> SectionField {
        SectionField { model: self.model, comps: self.comps.iter().map(|a| a * f).collect() }
    }
}

/// A k-form, k = 0 being a function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KFormField {
    model: u64,
    rank: usize,
    t: Alt,
}

/// A k-multisection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSectionField {
    model: u64,
    rank: usize,
    t: Alt,
}

macro_rules! alt_accessors {
    ($ty:ty) => {
        impl $ty {
            pub fn degree(&self) -> usize {
                self.t.degree
            }

            /// Component on an arbitrary index tuple (permutation sign applied).
            pub fn get(&self, idx: &[usize]) -> Expr {
                if self.t.degree > self.rank {
                    return Expr::zero();
                }
                self.t.get(idx)
            }

            /// Nonzero components on increasing tuples.
            pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
                self.t.comps.iter()
            }

            pub fn is_zero(&self) -> bool {
                self.t.comps.is_empty()
            }

            pub fn add(&self, o: &Self) -> Self {
                assert_eq!(self.t.degree, o.t.degree, "degree mismatch");
                Self { model: self.model, rank: self.rank, t: self.t.add(&o.t) }
            }

            pub fn sub(&self, o: &Self) -> Self {
                self.add(&o.scale(&Expr::int(-1)))
            }

            pub fn scale(&self, f: &Expr) -> Self {
                Self { model: self.model, rank: self.rank, t: self.t.scale(f) }
            }

            pub fn model_id(&self) -> u64 {
                self.model
            }
        }
    };
}

alt_accessors!(KFormField);
alt_accessors!(MultiSectionField);

impl KFormField {
    /// The function of a 0-form.
    pub fn as_function(&self) -> Expr {
        assert_eq!(self.t.degree, 0, "not a function");
        self.t.get(&[])
    }
}

fn fill_alt(degree: usize, rank: usize, comps: BTreeMap<Vec<usize>, Expr>) -> Result<Alt, AlgebroidError> {
    let mut t = Alt::new(degree);
    for (idx, e) in comps {
        if idx.len() != degree || idx.iter().any(|&i| i >= rank) {
            return Err(AlgebroidError::Shape(format!("index {idx:?} invalid for degree {degree}, rank {rank}")));
        }
        if let Some((s, sign)) = sort_with_sign(&idx) {
            let v = if sign > 0 { e } else { -e };
            let nv = t.get(&s) + v;
            t.set_sorted(s, nv);
        }
    }
    Ok(t)
}

impl AlgebroidModel {
    /// Model from dense data. `rho[I][i]`, `c[I][J][K]`, all 0-based.
    pub fn new(
        coords: Vec<String>,
        rank: usize,
        rho: Vec<Vec<Expr>>,
        c: Vec<Vec<Vec<Expr>>>,
    ) -> Result<AlgebroidModel, AlgebroidError> {
        let env = VarEnv::with(&coords, Role::Base).map_err(AlgebroidError::Env)?;
        let m = coords.len();
        if rho.len() != rank || rho.iter().any(|r| r.len() != m) {
            return Err(AlgebroidError::Shape(format!("anchor must be {rank}×{m}")));
        }
        if c.len() != rank || c.iter().any(|r| r.len() != rank || r.iter().any(|s| s.len() != rank)) {
            return Err(AlgebroidError::Shape(format!("structure functions must be {rank}×{rank}×{rank}")));
        }
        let model = AlgebroidModel {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            labels: (1..=rank).map(|i| format!("e{i}")).collect(),
            sample_box: vec![(-2.0, 2.0); m],
            coords,
            env,
            rank,
            rho,
            c,
        };
        for e in model.rho.iter().flatten().chain(model.c.iter().flatten().flatten()) {
            model.check_vars(e)?;
        }
        Ok(model)
    }

    /// First violation of C_IJ^K = −C_JI^K, if any. Models are built without
    /// this check so that the axiom report can show a broken tensor; every
    /// consumer beyond `check_axioms` calls [`AlgebroidModel::validated`].
    pub fn antisymmetry_violation(&self) -> Option<AlgebroidError> {
        let n = self.rank;
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let s = &self.c[i][j][k] + &self.c[j][i][k];
                    if !s.is_identically_zero() {
                        return Some(AlgebroidError::NotAntisymmetric { i: i + 1, j: j + 1, k: k + 1, residual: s.to_string() });
                    }
                }
            }
        }
        None
    }

    pub fn validated(self) -> Result<AlgebroidModel, AlgebroidError> {
        match self.antisymmetry_violation() {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    /// Model from sparse structure functions (0-based `(i, j, k, expr)`).
    /// The mirror entry C_JI^K = −C_IJ^K is filled in unless it is listed
    /// explicitly, so a deliberately broken tensor can still be expressed.
    pub fn from_sparse(
        coords: Vec<String>,
        rank: usize,
        rho: Vec<Vec<Expr>>,
        entries: &[(usize, usize, usize, Expr)],
    ) -> Result<AlgebroidModel, AlgebroidError> {
        let mut explicit: BTreeMap<(usize, usize, usize), Expr> = BTreeMap::new();
        for (i, j, k, e) in entries {
            let (i, j, k) = (*i, *j, *k);
            if i >= rank || j >= rank || k >= rank {
                return Err(AlgebroidError::Shape(format!("structure index ({}, {}, {}) out of range", i + 1, j + 1, k + 1)));
            }
            if let Some(prev) = explicit.get(&(i, j, k)) {
                if prev != e {
                    return Err(AlgebroidError::Conflict { i: i + 1, j: j + 1, k: k + 1 });
                }
            }
            explicit.insert((i, j, k), e.clone());
        }
        let mut c = vec![vec![vec![Expr::zero(); rank]; rank]; rank];
        for (&(i, j, k), e) in &explicit {
            c[i][j][k] = e.clone();
            if !explicit.contains_key(&(j, i, k)) {
                c[j][i][k] = -e;
            }
        }
        AlgebroidModel::new(coords, rank, rho, c)
    }

    fn check_vars(&self, e: &Expr) -> Result<(), AlgebroidError> {
        for v in e.free_vars() {
            if !self.env.contains(&v) {
                return Err(AlgebroidError::ForeignVariable { expr: e.to_string(), var: v });
            }
        }
        Ok(())
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn env(&self) -> &VarEnv {
        &self.env
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rho(&self, big_i: usize, i: usize) -> &Expr {
        &self.rho[big_i][i]
    }

    pub fn rho_matrix(&self) -> &[Vec<Expr>] {
        &self.rho
    }

    pub fn c(&self, i: usize, j: usize, k: usize) -> &Expr {
        &self.c[i][j][k]
    }

    pub fn sample_box(&self) -> &[(f64, f64)] {
        &self.sample_box
    }

    pub fn set_sample_box(&mut self, bx: Vec<(f64, f64)>) -> Result<(), AlgebroidError> {
        if bx.len() != self.dim() || bx.iter().any(|(a, b)| !(a < b)) {
            return Err(AlgebroidError::Shape("sample box must give lo < hi per coordinate".into()));
        }
        self.sample_box = bx;
        Ok(())
    }

    pub fn sample_ranges(&self) -> BTreeMap<String, (f64, f64)> {
        self.coords.iter().cloned().zip(self.sample_box.iter().copied()).collect()
    }

    pub fn relabel(mut self, labels: Vec<String>) -> AlgebroidModel {
        assert_eq!(labels.len(), self.rank);
        self.labels = labels;
        self
    }

    /// Every structure expression, compiled over the chart.
    pub fn guards(&self) -> Vec<Compiled> {
        self.rho
            .iter()
            .flatten()
            .chain(self.c.iter().flatten().flatten())
            .filter(|e| !e.is_polynomial())
            .filter_map(|e| e.compile(&self.coords).ok())
            .collect()
    }

    /// Seeded base points inside the sample box avoiding singular structure data.
    pub fn sample_points(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        Sampler::new(seed).guarded_points(&self.sample_box, &self.guards(), count)
    }

    fn same(&self, id: u64) -> Result<(), AlgebroidError> {
        if id == self.id {
            Ok(())
        } else {
            Err(AlgebroidError::ModelMismatch)
        }
    }

    // ── constructors ──────────────────────────────────────────────────────

    pub fn section(&self, comps: Vec<Expr>) -> Result<SectionField, AlgebroidError> {
        if comps.len() != self.rank {
            return Err(AlgebroidError::Shape(format!("section needs {} components, got {}", self.rank, comps.len())));
        }
        Ok(SectionField { model: self.id, comps })
    }

    pub fn basis_section(&self, i: usize) -> SectionField {
        let mut comps = vec![Expr::zero(); self.rank];
        comps[i] = Expr::one();
        SectionField { model: self.id, comps }
    }

    pub fn zero_section(&self) -> SectionField {
        SectionField { model: self.id, comps: vec![Expr::zero(); self.rank] }
    }

    pub fn function(&self, f: Expr) -> KFormField {
        let mut t = Alt::new(0);
        t.set_sorted(vec![], f);
        KFormField { model: self.id, rank: self.rank, t }
    }

    /// k-form from components on arbitrary (not necessarily sorted) index tuples.
    /// Entries on permuted tuples are added with the permutation sign.
    pub fn form(&self, degree: usize, comps: BTreeMap<Vec<usize>, Expr>) -> Result<KFormField, AlgebroidError> {
        Ok(KFormField { model: self.id, rank: self.rank, t: fill_alt(degree, self.rank, comps)? })
    }

    pub fn zero_form(&self, degree: usize) -> KFormField {
        KFormField { model: self.id, rank: self.rank, t: Alt::new(degree) }
    }

    pub fn one_form(&self, comps: Vec<Expr>) -> Result<KFormField, AlgebroidError> {
        if comps.len() != self.rank {
            return Err(AlgebroidError::Shape("1-form length".into()));
        }
        self.form(1, comps.into_iter().enumerate().map(|(i, e)| (vec![i], e)).collect())
    }

    pub fn dual_basis(&self, i: usize) -> KFormField {
        self.one_form((0..self.rank).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect())
            .expect("rank matches")
    }

    pub fn multisection(&self, degree: usize, comps: BTreeMap<Vec<usize>, Expr>) -> Result<MultiSectionField, AlgebroidError> {
        Ok(MultiSectionField { model: self.id, rank: self.rank, t: fill_alt(degree, self.rank, comps)? })
    }

    /// X₁∧…∧X_k for sections.
    pub fn wedge_sections(&self, xs: &[SectionField]) -> Result<MultiSectionField, AlgebroidError> {
        for x in xs {
            self.same(x.model)?;
        }
        let k = xs.len();
        let mut t = Alt::new(k);
        for s in combinations(self.rank, k) {
            let m: Vec<Vec<Expr>> = xs.iter().map(|x| s.iter().map(|&i| x.comps[i].clone()).collect()).collect();
            t.set_sorted(s, det(&m));
        }
        Ok(MultiSectionField { model: self.id, rank: self.rank, t })
    }

    // ── calculus ─────────────────────────────────────────────────────────

    /// Vector field components ρ(X)^i = X^I ρ_I^i.
    pub fn anchor_field(&self, x: &SectionField) -> Result<Vec<Expr>, AlgebroidError> {
        self.same(x.model)?;
        Ok((0..self.dim())
            .map(|i| (0..self.rank).map(|big| &x.comps[big] * &self.rho[big][i]).sum())
            .collect())
    }

    /// ρ(e_I)(f).
    pub fn basis_anchor_apply(&self, big: usize, f: &Expr) -> Expr {
        (0..self.dim())
            .filter(|&i| !self.rho[big][i].is_zero())
            .map(|i| &self.rho[big][i] * f.diff(&self.coords[i]))
            .sum()
    }

    /// ρ(X)(f) = X^I ρ_I^i ∂f/∂x^i.
    pub fn anchor_apply(&self, x: &SectionField, f: &Expr) -> Result<Expr, AlgebroidError> {
        let v = self.anchor_field(x)?;
        Ok(apply_vector(&v, &self.coords, f))
    }

    /// ⟦X,Y⟧^K = X^I ρ_I^i ∂_i Y^K − Y^J ρ_J^i ∂_i X^K + X^I Y^J C_IJ^K.
    pub fn bracket(&self, x: &SectionField, y: &SectionField) -> Result<SectionField, AlgebroidError> {
        self.same(x.model)?;
        self.same(y.model)?;
        let vx = self.anchor_field(x)?;
        let vy = self.anchor_field(y)?;
        let n = self.rank;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = apply_vector(&vx, &self.coords, &y.comps[k]) - apply_vector(&vy, &self.coords, &x.comps[k]);
            for i in 0..n {
                if x.comps[i].is_zero() {
                    continue;
                }
                for j in 0..n {
                    if y.comps[j].is_zero() || self.c[i][j][k].is_zero() {
                        continue;
                    }
                    acc = acc + &x.comps[i] * &y.comps[j] * &self.c[i][j][k];
                }
            }
            out.push(acc);
        }
        Ok(SectionField { model: self.id, comps: out })
    }

    /// Exterior differential. A form of top degree maps to the zero form of
    /// degree rank + 1.
    pub fn d(&self, mu: &KFormField) -> Result<KFormField, AlgebroidError> {
        self.same(mu.model)?;
        let k = mu.degree();
        let n = self.rank;
        let mut t = Alt::new(k + 1);
        if k >= n {
            return Ok(KFormField { model: self.id, rank: n, t });
        }
        // ∂_i of each stored component, computed once.
        let mut grads: HashMap<Vec<usize>, Vec<Expr>> = HashMap::new();
        for (idx, e) in &mu.t.comps {
            grads.insert(idx.clone(), self.coords.iter().map(|v| e.diff(v)).collect());
        }
        let anchor_on = |big: usize, rest: &[usize]| -> Expr {
            let Some((s, sign)) = sort_with_sign(rest) else { return Expr::zero() };
            let Some(g) = grads.get(&s) else { return Expr::zero() };
            let v: Expr = (0..self.dim())
                .filter(|&i| !self.rho[big][i].is_zero() && !g[i].is_zero())
                .map(|i| &self.rho[big][i] * &g[i])
                .sum();
            if sign > 0 {
                v
            } else {
                -v
            }
        };
        for s in combinations(n, k + 1) {
            let mut acc = Expr::zero();
            for i in 0..=k {
                let rest: Vec<usize> = s.iter().enumerate().filter(|&(p, _)| p != i).map(|(_, &v)| v).collect();
                let term = anchor_on(s[i], &rest);
                acc = if i % 2 == 0 { acc + term } else { acc - term };
            }
            for i in 0..=k {
                for j in i + 1..=k {
                    let rest: Vec<usize> =
                        s.iter().enumerate().filter(|&(p, _)| p != i && p != j).map(|(_, &v)| v).collect();
                    let mut inner = Expr::zero();
                    for kk in 0..n {
                        let c = &self.c[s[i]][s[j]][kk];
                        if c.is_zero() {
                            continue;
                        }
                        let mut idx = vec![kk];
                        idx.extend_from_slice(&rest);
                        let v = mu.t.get(&idx);
                        if !v.is_zero() {
                            inner = inner + c * v;
                        }
                    }
                    acc = if (i + j) % 2 == 0 { acc + inner } else { acc - inner };
                }
            }
            t.set_sorted(s, acc);
        }
        Ok(KFormField { model: self.id, rank: n, t })
    }

    /// (i_X μ)_{I2…Ik} = X^{I1} μ_{I1 I2…Ik}.
    pub fn interior(&self, x: &SectionField, mu: &KFormField) -> Result<KFormField, AlgebroidError> {
        self.same(x.model)?;
        self.same(mu.model)?;
        let k = mu.degree();
        if k == 0 {
            return Err(AlgebroidError::InteriorOfFunction);
        }
        let n = self.rank;
        let mut t = Alt::new(k - 1);
        if k > n {
            return Ok(KFormField { model: self.id, rank: n, t });
        }
        for s in combinations(n, k - 1) {
            let mut acc = Expr::zero();
            for (i, xi) in x.comps.iter().enumerate() {
                if xi.is_zero() {
                    continue;
                }
                let mut idx = vec![i];
                idx.extend_from_slice(&s);
                let v = mu.t.get(&idx);
                if !v.is_zero() {
                    acc = acc + xi * v;
                }
            }
            t.set_sorted(s, acc);
        }
        Ok(KFormField { model: self.id, rank: n, t })
    }

    /// Shuffle product; (α∧β)(X,Y) = α(X)β(Y) − α(Y)β(X) for 1-forms.
    pub fn wedge(&self, mu: &KFormField, nu: &KFormField) -> Result<KFormField, AlgebroidError> {
        self.same(mu.model)?;
        self.same(nu.model)?;
        let (k, l) = (mu.degree(), nu.degree());
        let n = self.rank;
        let mut t = Alt::new(k + l);
        if k + l > n {
            return Ok(KFormField { model: self.id, rank: n, t });
        }
        for s in combinations(n, k + l) {
            let mut acc = Expr::zero();
            for pos in combinations(k + l, k) {
                let a: Vec<usize> = pos.iter().map(|&p| s[p]).collect();
                let b: Vec<usize> = (0..k + l).filter(|p| !pos.contains(p)).map(|p| s[p]).collect();
                let va = mu.t.get(&a);
                if va.is_zero() {
                    continue;
                }
                let vb = nu.t.get(&b);
                if vb.is_zero() {
                    continue;
                }
                let inv = a.iter().map(|x| b.iter().filter(|y| *y < x).count()).sum::<usize>();
                let term = va * vb;
                acc = if inv % 2 == 0 { acc + term } else { acc - term };
            }
            t.set_sorted(s, acc);
        }
        Ok(KFormField { model: self.id, rank: n, t })
    }

    /// Cartan: L_X = i_X d + d i_X; on functions L_X f = ρ(X)f.
    pub fn lie_derivative_form(&self, x: &SectionField, mu: &KFormField) -> Result<KFormField, AlgebroidError> {
        self.same(x.model)?;
        self.same(mu.model)?;
        if mu.degree() == 0 {
            return Ok(self.function(self.anchor_apply(x, &mu.as_function())?));
        }
        let a = self.interior(x, &self.d(mu)?)?;
        let b = self.d(&self.interior(x, mu)?)?;
        Ok(a.add(&b))
    }

    /// (L_X P)(α₁,…,α_k) = ρ(X)(P(α₁,…)) − Σ_i P(…, L_X α_i, …), evaluated on the dual basis.
    pub fn lie_derivative_multisection(
        &self,
        x: &SectionField,
        p: &MultiSectionField,
    ) -> Result<MultiSectionField, AlgebroidError> {
        self.same(x.model)?;
        self.same(p.model)?;
        let n = self.rank;
        let k = p.degree();
        let lx: Vec<KFormField> =
            (0..n).map(|i| self.lie_derivative_form(x, &self.dual_basis(i))).collect::<Result<_, _>>()?;
        let mut t = Alt::new(k);
        if k > n {
            return Ok(MultiSectionField { model: self.id, rank: n, t });
        }
        for s in combinations(n, k) {
            let mut acc = self.anchor_apply(x, &p.t.get(&s))?;
            for i in 0..k {
                for j in 0..n {
                    let coef = lx[s[i]].t.get(&[j]);
                    if coef.is_zero() {
                        continue;
                    }
                    let mut idx = s.clone();
                    idx[i] = j;
                    let v = p.t.get(&idx);
                    if !v.is_zero() {
                        acc = acc - v * coef;
                    }
                }
            }
            t.set_sorted(s, acc);
        }
        Ok(MultiSectionField { model: self.id, rank: n, t })
    }

    /// μ(X₁,…,X_k).
    pub fn eval_form(&self, mu: &KFormField, xs: &[SectionField]) -> Result<Expr, AlgebroidError> {
        self.same(mu.model)?;
        if xs.len() != mu.degree() {
            return Err(AlgebroidError::Shape("argument count differs from degree".into()));
        }
        let mut cur = mu.clone();
        for x in xs {
            cur = self.interior(x, &cur)?;
        }
        Ok(cur.as_function())
    }

    /// α(X) for a 1-form.
    pub fn pair(&self, alpha: &KFormField, x: &SectionField) -> Result<Expr, AlgebroidError> {
        self.eval_form(alpha, std::slice::from_ref(x))
    }

    /// Random polynomial section (degree ≤ 2 components).
    pub fn random_section(&self, s: &mut Sampler) -> SectionField {
        SectionField { model: self.id, comps: (0..self.rank).map(|_| s.polynomial(&self.coords, 2)).collect() }
    }

    pub fn random_form(&self, degree: usize, s: &mut Sampler) -> KFormField {
        let mut t = Alt::new(degree);
        for idx in combinations(self.rank, degree) {
            t.set_sorted(idx, s.polynomial(&self.coords, 2));
        }
        KFormField { model: self.id, rank: self.rank, t }
    }

    // ── axioms ───────────────────────────────────────────────────────────

    /// Antisymmetry, Leibniz rule, Jacobi identity, anchor morphism and d² = 0.
    pub fn check_axioms(&self, settings: &Settings) -> Vec<Record> {
        let n = self.rank;
        let ranges = self.sample_ranges();
        let tol = settings.tol.sampled_identity;
        let rec = |id: &str, anchor: &str, exprs: Vec<Expr>| {
            identity_record(id, anchor, &exprs, &ranges, settings.seed, settings.samples, tol)
        };
        let mut out = Vec::new();

        let mut anti = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    anti.push(&self.c[i][j][k] + &self.c[j][i][k]);
                }
            }
        }
        out.push(rec("axioms/antisymmetry", "structure-function-antisymmetry", anti));

        let mut s = Sampler::derived(settings.seed, "leibniz");
        let mut leib = Vec::new();
        for _ in 0..3 {
            let x = self.random_section(&mut s);
            let y = self.random_section(&mut s);
            let f = s.polynomial(&self.coords, 2);
            let lhs = self.bracket(&x, &y.scale(&f)).expect("same model");
            let rhs = self
                .bracket(&x, &y)
                .expect("same model")
                .scale(&f)
                .add(&y.scale(&self.anchor_apply(&x, &f).expect("same model")));
            leib.extend(lhs.sub(&rhs).comps);
        }
        out.push(rec("axioms/leibniz", "leibniz-rule", leib));

        let basis: Vec<SectionField> = (0..n).map(|i| self.basis_section(i)).collect();
        let br = |a: &SectionField, b: &SectionField| self.bracket(a, b).expect("same model");
        let mut jac = Vec::new();
        // All ordered triples: with a non-antisymmetric tensor the cyclic sum
        // can vanish on distinct triples and fail only on repeated ones.
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = (&basis[i], &basis[j], &basis[k]);
                    let t = br(&br(a, b), c).add(&br(&br(b, c), a)).add(&br(&br(c, a), b));
                    jac.extend(t.comps);
                }
            }
        }
        out.push(rec("axioms/jacobi", "jacobi-identity", jac));

        let mut morph = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let lhs = self.anchor_field(&br(&basis[i], &basis[j])).expect("same model");
                let va = self.anchor_field(&basis[i]).expect("same model");
                let vb = self.anchor_field(&basis[j]).expect("same model");
                let rhs = vector_commutator(&va, &vb, &self.coords);
                morph.extend(lhs.iter().zip(&rhs).map(|(a, b)| a - b));
            }
        }
        out.push(rec("axioms/anchor-morphism", "anchor-is-bracket-morphism", morph));

        let mut s = Sampler::derived(settings.seed, "d-squared");
        let mut dd = Vec::new();
        for k in 0..n.min(2) {
            let mu = if k == 0 { self.function(s.polynomial(&self.coords, 3)) } else { self.random_form(k, &mut s) };
            let d2 = self.d(&self.d(&mu).expect("same model")).expect("same model");
            dd.extend(d2.t.comps.into_values());
        }
        out.push(rec("axioms/d-squared", "differential-squares-to-zero", dd));
        out
    }
}

/// v(f) = v^i ∂f/∂x^i.
pub fn apply_vector(v: &[Expr], coords: &[String], f: &Expr) -> Expr {
    v.iter()
        .zip(coords)
        .filter(|(vi, c)| !vi.is_zero() && f.depends_on(c))
        .map(|(vi, c)| vi * f.diff(c))
        .sum()
}

/// [v, w]^k = v(w^k) − w(v^k).
pub fn vector_commutator(v: &[Expr], w: &[Expr], coords: &[String]) -> Vec<Expr> {
    (0..coords.len()).map(|k| apply_vector(v, coords, &w[k]) - apply_vector(w, coords, &v[k])).collect()
}

/// Leibniz determinant; only used on small matrices.
pub fn det(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = Expr::zero();
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<Expr>> =
            m[1..].iter().map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, e)| e.clone()).collect()).collect();
        let t = &m[0][j] * det(&minor);
        acc = if j % 2 == 0 { acc + t } else { acc - t };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn tm2() -> AlgebroidModel {
        let rho = vec![vec![Expr::one(), Expr::zero()], vec![Expr::zero(), Expr::one()]];
        AlgebroidModel::from_sparse(s(&["x1", "x2"]), 2, rho, &[]).unwrap()
    }

    fn so3() -> AlgebroidModel {
        let rho = vec![vec![]; 3];
        let e = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];
        let entries: Vec<_> = e.iter().map(|&(i, j, k)| (i, j, k, Expr::one())).collect();
        AlgebroidModel::from_sparse(vec![], 3, rho, &entries).unwrap()
    }

    #[test]
    fn combinations_and_signs() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(sort_with_sign(&[2, 0, 1]), Some((vec![0, 1, 2], 1)));
        assert_eq!(sort_with_sign(&[1, 0]), Some((vec![0, 1], -1)));
        assert_eq!(sort_with_sign(&[1, 1]), None);
    }

    #[test]
    fn so3_bracket_of_basis() {
        let m = so3();
        let b = m.bracket(&m.basis_section(0), &m.basis_section(1)).unwrap();
        assert_eq!(b, m.basis_section(2));
    }

    #[test]
    fn tm2_bracket_is_vector_field_bracket() {
        let m = tm2();
        let x = m.section(vec![Expr::var("x2"), Expr::zero()]).unwrap();
        let y = m.section(vec![Expr::zero(), Expr::var("x1")]).unwrap();
        // [x2 ∂1, x1 ∂2] = x2 ∂2 − x1 ∂1
        let b = m.bracket(&x, &y).unwrap();
        assert_eq!(b.comps(), &[-Expr::var("x1"), Expr::var("x2")]);
    }

    #[test]
    fn anchor_apply_examples() {
        let m = tm2();
        let f = Expr::var("x1").powi(2);
        assert_eq!(m.anchor_apply(&m.basis_section(0), &f).unwrap(), Expr::int(2) * Expr::var("x1"));
        let so = so3();
        assert!(so.anchor_apply(&so.basis_section(0), &Expr::int(3)).unwrap().is_zero());
    }

    #[test]
    fn differential_of_function_and_dual_basis() {
        let m = tm2();
        let f = Expr::var("x1") * Expr::var("x2");
        let df = m.d(&m.function(f)).unwrap();
        assert_eq!(df.get(&[0]), Expr::var("x2"));
        assert_eq!(df.get(&[1]), Expr::var("x1"));
        let so = so3();
        let de3 = so.d(&so.dual_basis(2)).unwrap();
        let expected = so.wedge(&so.dual_basis(0), &so.dual_basis(1)).unwrap().scale(&Expr::int(-1));
        assert_eq!(de3, expected);
    }

    #[test]
    fn top_degree_differential_is_zero_object() {
        let so = so3();
        let vol = so.wedge(&so.wedge(&so.dual_basis(0), &so.dual_basis(1)).unwrap(), &so.dual_basis(2)).unwrap();
        let d = so.d(&vol).unwrap();
        assert_eq!(d.degree(), 4);
        assert!(d.is_zero());
    }

    #[test]
    fn wedge_conventions() {
        let so = so3();
        let w = so.wedge(&so.dual_basis(0), &so.dual_basis(1)).unwrap();
        let v = so.eval_form(&w, &[so.basis_section(0), so.basis_section(1)]).unwrap();
        assert_eq!(v, Expr::one());
        let w2 = so.wedge(&w, &so.dual_basis(0)).unwrap();
        assert!(w2.is_zero());
        let a = so.dual_basis(2);
        assert_eq!(so.wedge(&a, &w).unwrap(), so.wedge(&w, &a).unwrap());
        assert_eq!(so.wedge(&a, &so.dual_basis(1)).unwrap(), so.wedge(&so.dual_basis(1), &a).unwrap().scale(&Expr::int(-1)));
    }

    #[test]
    fn interior_examples() {
        let so = so3();
        let w = so.wedge(&so.dual_basis(0), &so.dual_basis(1)).unwrap();
        assert_eq!(so.interior(&so.basis_section(0), &w).unwrap(), so.dual_basis(1));
        assert_eq!(so.interior(&so.basis_section(0), &so.function(Expr::one())), Err(AlgebroidError::InteriorOfFunction));
    }

    #[test]
    fn multisection_derivative_matches_bracket_and_volume_invariance() {
        let m = tm2();
        let mut s = Sampler::new(3);
        let x = m.random_section(&mut s);
        let y = m.random_section(&mut s);
        let p = m.wedge_sections(std::slice::from_ref(&y)).unwrap();
        let l = m.lie_derivative_multisection(&x, &p).unwrap();
        let b = m.bracket(&x, &y).unwrap();
        for i in 0..2 {
            assert_eq!(l.get(&[i]), b.comps()[i]);
        }
        let so = so3();
        let p = so.wedge_sections(&[so.basis_section(1), so.basis_section(2)]).unwrap();
        assert!(so.lie_derivative_multisection(&so.basis_section(0), &p).unwrap().is_zero());
        let vol = so.wedge_sections(&[so.basis_section(0), so.basis_section(1), so.basis_section(2)]).unwrap();
        assert!(so.lie_derivative_multisection(&so.basis_section(0), &vol).unwrap().is_zero());
        let xx = so.wedge_sections(&[so.basis_section(0), so.basis_section(0)]).unwrap();
        assert!(so.lie_derivative_multisection(&so.basis_section(1), &xx).unwrap().is_zero());
    }

    #[test]
    fn flipped_structure_constant_breaks_jacobi() {
        let good = so3().check_axioms(&Settings::default());
        assert!(good.iter().all(|r| r.pass), "{good:?}");
        // Flip the stored C_12^3 alone; C_21^3 keeps its sign.
        let mut entries: Vec<_> = [(0, 1, 2, -1), (1, 0, 2, -1), (1, 2, 0, 1), (2, 0, 1, 1)]
            .iter()
            .map(|&(i, j, k, v)| (i, j, k, Expr::int(v)))
            .collect();
        let bad = AlgebroidModel::from_sparse(vec![], 3, vec![vec![]; 3], &entries).unwrap();
        assert!(bad.clone().validated().is_err());
        let recs = bad.check_axioms(&Settings::default());
        let jac = recs.iter().find(|r| r.id == "axioms/jacobi").unwrap();
        assert!(!jac.pass);
        assert!(!recs.iter().find(|r| r.id == "axioms/antisymmetry").unwrap().pass);
        // Flipping with the mirror completed gives sl(2,R), still a Lie algebra.
        entries.remove(1);
        let sl2 = AlgebroidModel::from_sparse(vec![], 3, vec![vec![]; 3], &entries).unwrap();
        assert!(sl2.check_axioms(&Settings::default()).iter().all(|r| r.pass));
    }

    #[test]
    fn foreign_models_are_rejected() {
        let a = tm2();
        let b = tm2();
        assert_eq!(a.bracket(&a.basis_section(0), &b.basis_section(0)), Err(AlgebroidError::ModelMismatch));
    }

    #[test]
    fn conflicting_sparse_entries() {
        let e = vec![(0, 1, 0, Expr::one()), (0, 1, 0, Expr::int(2))];
        let r = AlgebroidModel::from_sparse(vec![], 2, vec![vec![]; 2], &e);
        assert!(matches!(r, Err(AlgebroidError::Conflict { .. })));
    }
}
