//! Sparse multivariate polynomials over Q whose indeterminates are atoms:
//! plain variables or elementary functions of canonical expressions.
//!
//! Division and gcd work recursively in the largest atom present, which keeps
//! the algorithms univariate at every level.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::Expr;

pub type Q = BigRational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Var(Arc<str>),
    Func(Func, Expr),
}

/// Product of atom powers, sorted by atom, exponents strictly positive.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono(pub Vec<(Atom, u32)>);

impl Mono {
    pub fn one() -> Self {
        Mono(Vec::new())
    }

    pub fn atom(a: Atom, k: u32) -> Self {
        if k == 0 {
            Mono::one()
        } else {
            Mono(vec![(a, k)])
        }
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        let (a, b) = (&self.0, &o.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Mono(out)
    }

    pub fn degree_in(&self, a: &Atom) -> u32 {
        self.0.iter().find(|(x, _)| x == a).map_or(0, |(_, k)| *k)
    }

    pub fn without(&self, a: &Atom) -> Mono {
        Mono(self.0.iter().filter(|(x, _)| x != a).cloned().collect())
    }

    /// Same monomial with the exponent of entry `idx` lowered by one.
    pub fn lowered(&self, idx: usize) -> Mono {
        let mut v = self.0.clone();
        if v[idx].1 == 1 {
            v.remove(idx);
        } else {
            v[idx].1 -= 1;
        }
        Mono(v)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poly {
    pub terms: BTreeMap<Mono, Q>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::one(), c);
        p
    }

    pub fn from_mono(m: Mono) -> Self {
        let mut p = Poly::zero();
        p.add_term(m, Q::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn as_constant(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn add_term(&mut self, m: Mono, c: Q) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), -c.clone());
        }
        r
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn scale(&self, k: &Q) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if let Some(c) = o.as_constant() {
            return self.scale(&c);
        }
        if let Some(c) = self.as_constant() {
            return o.scale(&c);
        }
        let mut r = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                r.add_term(m1.mul(m2), c1 * c2);
            }
        }
        r
    }

    pub fn pow(&self, mut k: u32) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn max_atom(&self) -> Option<&Atom> {
        self.terms.keys().flat_map(|m| m.0.iter().map(|(a, _)| a)).max()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.terms.keys().flat_map(|m| m.0.iter().map(|(a, _)| a))
    }

    pub fn degree_in(&self, a: &Atom) -> u32 {
        self.terms.keys().map(|m| m.degree_in(a)).max().unwrap_or(0)
    }

    /// Coefficients as a univariate polynomial in `a`, index = degree.
    pub fn coeffs_in(&self, a: &Atom) -> Vec<Poly> {
        let mut out = vec![Poly::zero(); self.degree_in(a) as usize + 1];
        for (m, c) in &self.terms {
            out[m.degree_in(a) as usize].add_term(m.without(a), c.clone());
        }
        out
    }

    pub fn from_coeffs(a: &Atom, coeffs: &[Poly]) -> Poly {
        let mut r = Poly::zero();
        for (k, p) in coeffs.iter().enumerate() {
            let am = Mono::atom(a.clone(), k as u32);
            for (m, c) in &p.terms {
                r.add_term(m.mul(&am), c.clone());
            }
        }
        r
    }

    fn lc_in(&self, a: &Atom) -> Poly {
        self.coeffs_in(a).pop().unwrap_or_default()
    }

    /// Coefficient of the largest monomial; used to fix the unit in normal forms.
    pub fn leading_coeff(&self) -> Option<&Q> {
        self.terms.values().next_back()
    }

    pub fn monic(&self) -> Poly {
        match self.leading_coeff() {
            Some(c) if !c.is_one() => self.scale(&c.recip()),
            _ => self.clone(),
        }
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        assert!(!d.is_zero(), "polynomial division by zero");
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let v = self.max_atom().into_iter().chain(d.max_atom()).max().unwrap().clone();
        let dd = d.degree_in(&v);
        if dd == 0 {
            let cs = self.coeffs_in(&v);
            let qs: Option<Vec<Poly>> = cs.iter().map(|c| c.div_exact(d)).collect();
            return qs.map(|qs| Poly::from_coeffs(&v, &qs));
        }
        let ld = d.lc_in(&v);
        let mut r = self.clone();
        let mut q = Poly::zero();
        while !r.is_zero() {
            let dr = r.degree_in(&v);
            if dr < dd {
                return None;
            }
            let t = r.lc_in(&v).div_exact(&ld)?;
            let term = t.mul(&Poly::from_mono(Mono::atom(v.clone(), dr - dd)));
            r = r.sub(&term.mul(d));
            q = q.add(&term);
        }
        Some(q)
    }

    /// Pseudo-remainder of `self` by `d` in the atom `v` (deg_v d ≥ 1).
    fn prem(&self, d: &Poly, v: &Atom) -> Poly {
        let dd = d.degree_in(v);
        let ld = d.lc_in(v);
        let mut r = self.clone();
        while !r.is_zero() {
            let dr = r.degree_in(v);
            if dr < dd {
                break;
            }
            let lr = r.lc_in(v);
            let shift = Poly::from_mono(Mono::atom(v.clone(), dr - dd));
            r = r.mul(&ld).sub(&lr.mul(&shift).mul(d));
        }
        r
    }

    fn content_in(&self, v: &Atom) -> Poly {
        let mut g = Poly::zero();
        for c in self.coeffs_in(v) {
            if c.is_zero() {
                continue;
            }
            g = gcd(&g, &c);
            if g.is_one() {
                break;
            }
        }
        g
    }
}

/// Greatest common divisor, normalized monic in the crate's monomial order.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.as_constant().is_some() || b.as_constant().is_some() {
        return Poly::one();
    }
    let v = a.max_atom().into_iter().chain(b.max_atom()).max().unwrap().clone();
    let (da, db) = (a.degree_in(&v), b.degree_in(&v));
    if da == 0 {
        return gcd(a, &b.content_in(&v));
    }
    if db == 0 {
        return gcd(&a.content_in(&v), b);
    }
    let (ca, cb) = (a.content_in(&v), b.content_in(&v));
    let c = gcd(&ca, &cb);
    let mut p = a.div_exact(&ca).expect("content divides");
    let mut q = b.div_exact(&cb).expect("content divides");
    if p.degree_in(&v) < q.degree_in(&v) {
        std::mem::swap(&mut p, &mut q);
    }
    loop {
        let r = p.prem(&q, &v);
        if r.is_zero() {
            break;
        }
        if r.degree_in(&v) == 0 {
            q = Poly::one();
            break;
        }
        let cr = r.content_in(&v);
        p = q;
        // Dropping the numeric content too keeps coefficients from compounding.
        q = r.div_exact(&cr).expect("content divides").monic();
    }
    let cq = q.content_in(&v);
    let g = q.div_exact(&cq).expect("content divides");
    c.mul(&g).monic()
}

pub(crate) fn q_to_f64(q: &Q) -> f64 {
    use num_traits::ToPrimitive;
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => q.to_f64().unwrap_or(f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(s: &str) -> Poly {
        Poly::from_mono(Mono::atom(Atom::Var(s.into()), 1))
    }

    fn c(n: i64) -> Poly {
        Poly::constant(Q::from_integer(n.into()))
    }

    #[test]
    fn exact_division_of_product() {
        let x = var("x");
        let y = var("y");
        let a = x.add(&y).mul(&x.sub(&c(2)));
        let b = x.add(&y);
        assert_eq!(a.div_exact(&b), Some(x.sub(&c(2))));
        assert_eq!(a.div_exact(&x), None);
    }

    #[test]
    fn gcd_recovers_common_factor() {
        let x = var("x");
        let y = var("y");
        let f = x.mul(&y).add(&c(1));
        let a = f.mul(&x.sub(&y));
        let b = f.mul(&x.add(&y)).mul(&x);
        assert_eq!(gcd(&a, &b), f.monic());
    }

    #[test]
    fn gcd_of_coprime_is_one() {
        let x = var("x");
        let y = var("y");
        assert!(gcd(&x.add(&c(1)), &y.sub(&c(1))).is_one());
        assert!(gcd(&x.pow(2).sub(&c(2)), &x.sub(&c(1))).is_one());
    }

    #[test]
    fn gcd_of_difference_of_squares() {
        let x = var("x");
        let a = x.pow(2).sub(&c(1));
        let b = x.sub(&c(1)).mul(&x.add(&c(3)));
        assert_eq!(gcd(&a, &b), x.sub(&c(1)).monic());
    }
}
