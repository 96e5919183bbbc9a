//! Lie algebras by structure constants, group elements through their
//! adjoint action, and the tangent group TG = G × g.

use thiserror::Error;

use crate::linalg::{null_space, Mat};
use crate::symexpr::Expr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("structure constant c_{a}{b}^{e} is not a rational constant: {expr}")]
    NotConstant { a: usize, b: usize, e: usize, expr: String },
    #[error("structure constant index ({a}, {b}, {e}) out of range for dimension {dim}")]
    Index { a: usize, b: usize, e: usize, dim: usize },
    #[error("structure constants not antisymmetric at c_{a}{b}^{e}")]
    NotAntisymmetric { a: usize, b: usize, e: usize },
    #[error("Jacobi identity fails on (ξ{a}, ξ{b}, ξ{c})")]
    Jacobi { a: usize, b: usize, c: usize },
    #[error("conflicting entries for c_{a}{b}^{e}")]
    Conflict { a: usize, b: usize, e: usize },
}

#[derive(Clone, Debug)]
pub struct LieAlgebra {
    dim: usize,
    c: Vec<Vec<Vec<Expr>>>,
    cf: Vec<f64>,
}

impl LieAlgebra {
    /// Algebra from sparse 0-based entries `(a, b, e, value)`, mirrors completed.
    pub fn from_sparse(dim: usize, entries: &[(usize, usize, usize, Expr)]) -> Result<LieAlgebra, LieError> {
        let mut c = vec![vec![vec![Expr::zero(); dim]; dim]; dim];
        let mut set = vec![vec![vec![false; dim]; dim]; dim];
        for (a, b, e, v) in entries {
            let (a, b, e) = (*a, *b, *e);
            if a >= dim || b >= dim || e >= dim {
                return Err(LieError::Index { a: a + 1, b: b + 1, e: e + 1, dim });
            }
            if v.as_rational().is_none() {
                return Err(LieError::NotConstant { a: a + 1, b: b + 1, e: e + 1, expr: v.to_string() });
            }
            if set[a][b][e] && c[a][b][e] != *v {
                return Err(LieError::Conflict { a: a + 1, b: b + 1, e: e + 1 });
            }
            set[a][b][e] = true;
            c[a][b][e] = v.clone();
        }
        for a in 0..dim {
            for b in 0..dim {
                for e in 0..dim {
                    if set[a][b][e] && !set[b][a][e] {
                        c[b][a][e] = -&c[a][b][e];
                        set[b][a][e] = true;
                    }
                }
            }
        }
        LieAlgebra::new(c)
    }

    /// Dense constructor; checks antisymmetry and the Jacobi identity exactly.
    pub fn new(c: Vec<Vec<Vec<Expr>>>) -> Result<LieAlgebra, LieError> {
        let dim = c.len();
        for a in 0..dim {
            for b in 0..dim {
                for e in 0..dim {
                    if c[a][b][e].as_rational().is_none() {
                        return Err(LieError::NotConstant { a: a + 1, b: b + 1, e: e + 1, expr: c[a][b][e].to_string() });
                    }
                    if !(&c[a][b][e] + &c[b][a][e]).is_zero() {
                        return Err(LieError::NotAntisymmetric { a: a + 1, b: b + 1, e: e + 1 });
                    }
                }
            }
        }
        let cf = c.iter().flatten().flatten().map(|e| e.to_f64().expect("constant")).collect();
        let alg = LieAlgebra { dim, c, cf };
        for a in 0..dim {
            for b in a + 1..dim {
                for cc in b + 1..dim {
                    if alg.jacobi_residual(a, b, cc).iter().any(|e| !e.is_zero()) {
                        return Err(LieError::Jacobi { a: a + 1, b: b + 1, c: cc + 1 });
                    }
                }
            }
        }
        Ok(alg)
    }

    pub fn abelian(dim: usize) -> LieAlgebra {
        LieAlgebra::new(vec![vec![vec![Expr::zero(); dim]; dim]; dim]).expect("abelian algebra is valid")
    }

    /// so(3) with c_ab^e = ε_abe.
    pub fn so3() -> LieAlgebra {
        let one = Expr::one;
        LieAlgebra::from_sparse(3, &[(0, 1, 2, one()), (1, 2, 0, one()), (2, 0, 1, one())]).expect("so(3)")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self, a: usize, b: usize, e: usize) -> &Expr {
        &self.c[a][b][e]
    }

    pub fn cf(&self, a: usize, b: usize, e: usize) -> f64 {
        self.cf[(a * self.dim + b) * self.dim + e]
    }

    pub fn is_abelian(&self) -> bool {
        self.cf.iter().all(|&v| v == 0.0)
    }

    /// Exact cyclic sum [[ξa,ξb],ξc] + cyc as a component vector.
    pub fn jacobi_residual(&self, a: usize, b: usize, c: usize) -> Vec<Expr> {
        let d = self.dim;
        let br = |x: usize, y: usize, z: usize, out: &mut Vec<Expr>| {
            // [[ξx,ξy],ξz]^e = c_xy^k c_kz^e
            for e in 0..d {
                for k in 0..d {
                    if !self.c[x][y][k].is_zero() && !self.c[k][z][e].is_zero() {
                        out[e] = &out[e] + &self.c[x][y][k] * &self.c[k][z][e];
                    }
                }
            }
        };
        let mut out = vec![Expr::zero(); d];
        br(a, b, c, &mut out);
        br(b, c, a, &mut out);
        br(c, a, b, &mut out);
        out
    }

    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for a in 0..d {
            for b in 0..d {
                let w = x[a] * y[b];
                if w == 0.0 {
                    continue;
                }
                for (e, o) in out.iter_mut().enumerate() {
                    *o += w * self.cf(a, b, e);
                }
            }
        }
        out
    }

    /// Bracket of symbolic coefficient vectors.
    pub fn bracket_expr(&self, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
        let d = self.dim;
        (0..d)
            .map(|e| {
                let mut acc = Expr::zero();
                for a in 0..d {
                    for b in 0..d {
                        if !self.c[a][b][e].is_zero() && !x[a].is_zero() && !y[b].is_zero() {
                            acc = acc + &x[a] * &y[b] * &self.c[a][b][e];
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// (ad_ξ)^e_b = c_ab^e ξ^a.
    pub fn ad(&self, xi: &[f64]) -> Mat {
        let d = self.dim;
        Mat::from_fn(d, d, |e, b| (0..d).map(|a| self.cf(a, b, e) * xi[a]).sum())
    }

    /// coad_ξ μ = −(ad_ξ)^T μ.
    pub fn coad(&self, xi: &[f64], mu: &[f64]) -> Vec<f64> {
        let m = -self.ad(xi).transpose() * nalgebra::DVector::from_column_slice(mu);
        m.iter().copied().collect()
    }

    /// Orthonormal basis of g_μ = {η : coad_η μ = 0}.
    pub fn isotropy_subalgebra(&self, mu: &[f64], rel: f64) -> Mat {
        let d = self.dim;
        // Column a is coad_{ξa} μ.
        let m = Mat::from_fn(d, d, |b, a| -(0..d).map(|e| self.cf(a, b, e) * mu[e]).sum::<f64>());
        if m.iter().all(|v| *v == 0.0) {
            return Mat::identity(d, d);
        }
        null_space(&m, rel)
    }
}

/// exp(A) by scaling and squaring with the diagonal Padé approximant of order 6.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let norm1 = (0..n).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0i32;
    if norm1 > 0.5 {
        s = (norm1 / 0.5).log2().ceil() as i32;
    }
    let x = a / 2f64.powi(s);
    const Q: usize = 6;
    let mut c = 1.0;
    let mut num = Mat::identity(n, n);
    let mut den = Mat::identity(n, n);
    let mut xk = Mat::identity(n, n);
    for k in 1..=Q {
        c *= (Q - k + 1) as f64 / (k * (2 * Q - k + 1)) as f64;
        xk = &xk * &x;
        num += &xk * c;
        if k % 2 == 0 {
            den += &xk * c;
        } else {
            den -= &xk * c;
        }
    }
    let mut r = den.lu().solve(&num).expect("Padé denominator is invertible for small norm");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// A group element exp(t₁η₁)·exp(t₂η₂)⋯ known through its adjoint action.
#[derive(Clone, Debug)]
pub struct GroupElement {
    word: Vec<(Vec<f64>, f64)>,
    ad: Mat,
    ad_inv: Mat,
}

impl GroupElement {
    pub fn identity(d: usize) -> GroupElement {
        GroupElement { word: Vec::new(), ad: Mat::identity(d, d), ad_inv: Mat::identity(d, d) }
    }

    pub fn exp(alg: &LieAlgebra, eta: &[f64], t: f64) -> GroupElement {
        let a = alg.ad(eta) * t;
        GroupElement { word: vec![(eta.to_vec(), t)], ad: expm(&a), ad_inv: expm(&(-a)) }
    }

    /// Factors in product order; φ_g applies the last factor first.
    pub fn word(&self) -> &[(Vec<f64>, f64)] {
        &self.word
    }

    pub fn ad(&self) -> &Mat {
        &self.ad
    }

    pub fn ad_inv(&self) -> &Mat {
        &self.ad_inv
    }

    /// Coad_g = (Ad_g)^{-T}.
    pub fn coad_matrix(&self) -> Mat {
        self.ad_inv.transpose()
    }

    pub fn coad(&self, mu: &[f64]) -> Vec<f64> {
        (self.coad_matrix() * nalgebra::DVector::from_column_slice(mu)).iter().copied().collect()
    }

    pub fn adjoint(&self, xi: &[f64]) -> Vec<f64> {
        (&self.ad * nalgebra::DVector::from_column_slice(xi)).iter().copied().collect()
    }

    pub fn adjoint_inv(&self, xi: &[f64]) -> Vec<f64> {
        (&self.ad_inv * nalgebra::DVector::from_column_slice(xi)).iter().copied().collect()
    }

    pub fn mul(&self, o: &GroupElement) -> GroupElement {
        let mut word = self.word.clone();
        word.extend(o.word.iter().cloned());
        GroupElement { word, ad: &self.ad * &o.ad, ad_inv: &o.ad_inv * &self.ad_inv }
    }

    pub fn inverse(&self) -> GroupElement {
        let word = self.word.iter().rev().map(|(e, t)| (e.clone(), -t)).collect();
        GroupElement { word, ad: self.ad_inv.clone(), ad_inv: self.ad.clone() }
    }
}

/// (g, ξ) ∈ TG ≅ G × g.
#[derive(Clone, Debug)]
pub struct TGElement {
    pub g: GroupElement,
    pub xi: Vec<f64>,
}

impl TGElement {
    pub fn identity(d: usize) -> TGElement {
        TGElement { g: GroupElement::identity(d), xi: vec![0.0; d] }
    }

    pub fn new(g: GroupElement, xi: Vec<f64>) -> TGElement {
        TGElement { g, xi }
    }

    /// (g,ξ)·(g′,ξ′) = (gg′, ξ′ + Ad_{g′⁻¹}ξ).
    pub fn mul(&self, o: &TGElement) -> TGElement {
        let shifted = o.g.adjoint_inv(&self.xi);
        TGElement { g: self.g.mul(&o.g), xi: o.xi.iter().zip(&shifted).map(|(a, b)| a + b).collect() }
    }

    /// (g,ξ)⁻¹ = (g⁻¹, −Ad_g ξ).
    pub fn inverse(&self) -> TGElement {
        TGElement { g: self.g.inverse(), xi: self.g.adjoint(&self.xi).iter().map(|v| -v).collect() }
    }

    /// Coad^{TG}_{(g,ξ)}(μ′,μ″) = (Coad_g(μ′ + coad_ξ μ″), Coad_g μ″).
    pub fn coad(&self, alg: &LieAlgebra, mu1: &[f64], mu2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = alg.coad(&self.xi, mu2);
        let inner: Vec<f64> = mu1.iter().zip(&c).map(|(a, b)| a + b).collect();
        (self.g.coad(&inner), self.g.coad(mu2))
    }
}

/// [(ξ,η),(ξ′,η′)] = ([ξ,ξ′], [ξ,η′] − [ξ′,η]).
pub fn tg_bracket(alg: &LieAlgebra, p: (&[f64], &[f64]), q: (&[f64], &[f64])) -> (Vec<f64>, Vec<f64>) {
    let a = alg.bracket(p.0, q.0);
    let b1 = alg.bracket(p.0, q.1);
    let b2 = alg.bracket(q.0, p.1);
    (a, b1.iter().zip(&b2).map(|(x, y)| x - y).collect())
}

/// Symbolic version of [`tg_bracket`].
pub fn tg_bracket_expr(alg: &LieAlgebra, p: (&[Expr], &[Expr]), q: (&[Expr], &[Expr])) -> (Vec<Expr>, Vec<Expr>) {
    let a = alg.bracket_expr(p.0, q.0);
    let b1 = alg.bracket_expr(p.0, q.1);
    let b2 = alg.bracket_expr(q.0, p.1);
    (a, b1.iter().zip(&b2).map(|(x, y)| x - y).collect())
}

/// Second-order commutator of the one-parameter subgroups (exp(sξ), sη) and
/// (exp(sξ′), sη′), read off as a tangent vector (ζ, ω) of TG at the identity.
/// Richardson extrapolation in s removes the O(s³) term.
pub fn tg_commutator_derivative(alg: &LieAlgebra, p: (&[f64], &[f64]), q: (&[f64], &[f64]), s: f64) -> (Vec<f64>, Vec<f64>) {
    let d = alg.dim();
    let at = |s: f64| {
        let a = TGElement::new(GroupElement::exp(alg, p.0, s), p.1.iter().map(|v| v * s).collect());
        let b = TGElement::new(GroupElement::exp(alg, q.0, s), q.1.iter().map(|v| v * s).collect());
        let c = a.mul(&b).mul(&a.inverse()).mul(&b.inverse());
        (c.g.ad() - Mat::identity(d, d), c.xi)
    };
    let (m1, v1) = at(s);
    let (m2, v2) = at(2.0 * s);
    let m = (m1 * 8.0 - m2) / (4.0 * s * s);
    let v: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| (8.0 * a - b) / (4.0 * s * s)).collect();
    // Ad of the commutator is I + s²·ad_ζ + …; recover ζ by least squares over ad.
    let basis: Vec<Mat> = (0..d)
        .map(|a| {
            let mut e = vec![0.0; d];
            e[a] = 1.0;
            alg.ad(&e)
        })
        .collect();
    let zeta = if alg.is_abelian() {
        vec![0.0; d]
    } else {
        let big = Mat::from_fn(d * d, d, |r, a| basis[a][(r / d, r % d)]);
        let rhs = nalgebra::DVector::from_fn(d * d, |r, _| m[(r / d, r % d)]);
        let svd = big.svd(true, true);
        svd.solve(&rhs, 1e-12).expect("least squares").iter().copied().collect()
    };
    (zeta, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn ad_of_so3_third_axis() {
        let g = LieAlgebra::so3();
        let m = g.ad(&[0.0, 0.0, 1.0]);
        let expected = Mat::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(m, expected);
        assert!(max_abs(&LieAlgebra::abelian(2).ad(&[1.0, 2.0])) == 0.0);
    }

    #[test]
    fn adjoint_is_rodrigues_rotation() {
        let g = LieAlgebra::so3();
        let t = std::f64::consts::FRAC_PI_2;
        let r = GroupElement::exp(&g, &[0.0, 0.0, 1.0], t);
        // Rodrigues: I + sin t K + (1 − cos t) K² with K the axis generator.
        let k = g.ad(&[0.0, 0.0, 1.0]);
        let rod = Mat::identity(3, 3) + &k * t.sin() + &k * &k * (1.0 - t.cos());
        assert!(max_abs(&(r.ad() - rod)) < 1e-12);
        assert!(max_abs(&(r.ad() * r.ad_inv() - Mat::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn expm_against_series() {
        let a = Mat::from_row_slice(2, 2, &[0.3, 1.7, -2.2, 0.1]);
        let mut series = Mat::identity(2, 2);
        let mut term = Mat::identity(2, 2);
        for k in 1..60 {
            term = &term * &a / k as f64;
            series += &term;
        }
        assert!(max_abs(&(expm(&a) - series)) < 1e-13);
    }

    #[test]
    fn isotropy_of_so3() {
        let g = LieAlgebra::so3();
        let k = g.isotropy_subalgebra(&[0.0, 0.0, 1.0], 1e-10);
        assert_eq!(k.ncols(), 1);
        assert!((k[(2, 0)].abs() - 1.0).abs() < 1e-12);
        assert_eq!(g.isotropy_subalgebra(&[0.0; 3], 1e-10).ncols(), 3);
    }

    #[test]
    fn rejects_non_lie_constants() {
        let one = Expr::one;
        // [e1,e2] = e1, [e1,e3] = e2: the cyclic sum on (e1,e2,e3) is e2.
        let r = LieAlgebra::from_sparse(3, &[(0, 1, 0, one()), (0, 2, 1, one())]);
        assert!(matches!(r, Err(LieError::Jacobi { .. })));
        let x = LieAlgebra::from_sparse(2, &[(0, 1, 1, Expr::var("x"))]);
        assert!(matches!(x, Err(LieError::NotConstant { .. })));
    }
}
