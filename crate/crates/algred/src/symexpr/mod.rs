//! Exact symbolic scalars over a coordinate chart.
//!
//! Every [`Expr`] is stored as a reduced quotient of two polynomials with
//! rational coefficients. The polynomial indeterminates are variables and
//! applications of `sin`, `cos`, `exp` to canonical arguments. Numerator and
//! denominator are coprime and the denominator is monic, so two expressions for
//! the same rational function are structurally equal.

mod eval;
mod parse;
mod poly;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};

pub use eval::{Compiled, EvalError};
pub use parse::{parse, ParseError};
pub use poly::{Atom, Func, Mono, Poly, Q};

use poly::{gcd, q_to_f64};

/// Role of a name in a [`VarEnv`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Base,
    Fiber,
    Param,
}

/// Ordered set of admissible variable names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarEnv {
    vars: Vec<(String, Role)>,
}

impl VarEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(names: &[String], role: Role) -> Result<Self, String> {
        let mut e = Self::new();
        for n in names {
            e.push(n, role)?;
        }
        Ok(e)
    }

    pub fn push(&mut self, name: &str, role: Role) -> Result<(), String> {
        if !is_identifier(name) {
            return Err(format!("`{name}` is not a valid identifier"));
        }
        if matches!(name, "sin" | "cos" | "exp") {
            return Err(format!("`{name}` is reserved"));
        }
        if self.contains(name) {
            return Err(format!("duplicate variable `{name}`"));
        }
        self.vars.push((name.to_string(), role));
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.iter().any(|(n, _)| n == name)
    }

    pub fn role(&self, name: &str) -> Option<Role> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, r)| *r)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut ch = s.chars();
    matches!(ch.next(), Some(c) if c.is_ascii_alphabetic())
        && ch.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct RatFn {
    num: Poly,
    den: Poly,
}

/// Canonical symbolic expression. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<RatFn>);

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

impl Expr {
    fn from_parts(num: Poly, den: Poly) -> Expr {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return Expr::from_poly(Poly::zero());
        }
        if let Some(c) = den.as_constant() {
            return Expr::from_poly(num.scale(&c.recip()));
        }
        let g = gcd(&num, &den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (num.div_exact(&g).unwrap(), den.div_exact(&g).unwrap())
        };
        let lc = den.leading_coeff().unwrap().recip();
        let (num, den) = (num.scale(&lc), den.scale(&lc));
        if den.is_one() {
            return Expr::from_poly(num);
        }
        Expr(Arc::new(RatFn { num, den }))
    }

    pub fn from_poly(p: Poly) -> Expr {
        Expr(Arc::new(RatFn { num: p, den: Poly::one() }))
    }

    pub fn zero() -> Expr {
        Expr::from_poly(Poly::zero())
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn int(n: i64) -> Expr {
        Expr::rational(Q::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::rational(Q::new(n.into(), d.into()))
    }

    pub fn rational(q: Q) -> Expr {
        Expr::from_poly(Poly::constant(q))
    }

    pub fn var(name: &str) -> Expr {
        Expr::atom(Atom::Var(name.into()))
    }

    fn atom(a: Atom) -> Expr {
        Expr::from_poly(Poly::from_mono(Mono::atom(a, 1)))
    }

    pub fn numer(&self) -> &Poly {
        &self.0.num
    }

    pub fn denom(&self) -> &Poly {
        &self.0.den
    }

    pub fn is_polynomial(&self) -> bool {
        self.0.den.is_one()
    }

    /// True iff the canonical form is the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.0.num.is_zero()
    }

    pub fn as_rational(&self) -> Option<Q> {
        if self.is_polynomial() {
            self.0.num.as_constant()
        } else {
            None
        }
    }

    pub fn apply(f: Func, arg: &Expr) -> Expr {
        if let Some(q) = arg.as_rational() {
            if q.is_zero() {
                return match f {
                    Func::Sin => Expr::zero(),
                    Func::Cos | Func::Exp => Expr::one(),
                };
            }
        }
        Expr::atom(Atom::Func(f, arg.clone()))
    }

    pub fn sin(&self) -> Expr {
        Expr::apply(Func::Sin, self)
    }

    pub fn cos(&self) -> Expr {
        Expr::apply(Func::Cos, self)
    }

    pub fn exp(&self) -> Expr {
        Expr::apply(Func::Exp, self)
    }

    pub fn powi(&self, k: i32) -> Expr {
        let (num, den) = (&self.0.num, &self.0.den);
        if k >= 0 {
            let k = k as u32;
            return Expr::from_parts(num.pow(k), den.pow(k));
        }
        assert!(!self.is_zero(), "negative power of zero");
        let k = k.unsigned_abs();
        Expr::from_parts(den.pow(k), num.pow(k))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    /// Whether any elementary function occurs (at any depth).
    pub fn has_functions(&self) -> bool {
        self.0.num.atoms().chain(self.0.den.atoms()).any(|a| matches!(a, Atom::Func(..)))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        for a in self.0.num.atoms().chain(self.0.den.atoms()) {
            match a {
                Atom::Var(v) => {
                    out.insert(v.to_string());
                }
                Atom::Func(_, e) => e.collect_vars(out),
            }
        }
    }

    pub fn depends_on(&self, v: &str) -> bool {
        self.0.num.atoms().chain(self.0.den.atoms()).any(|a| atom_depends_on(a, v))
    }

    /// Exact partial derivative.
    pub fn diff(&self, v: &str) -> Expr {
        if !self.depends_on(v) {
            return Expr::zero();
        }
        let dn = diff_poly(&self.0.num, v);
        if self.is_polynomial() {
            return dn;
        }
        let n = Expr::from_poly(self.0.num.clone());
        let d = Expr::from_poly(self.0.den.clone());
        let dd = diff_poly(&self.0.den, v);
        (dn * &d - n * dd) / (&d * &d)
    }

    /// Simultaneous substitution of variables by expressions.
    pub fn subst(&self, map: &BTreeMap<String, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        let n = subst_poly(&self.0.num, map);
        if self.is_polynomial() {
            return n;
        }
        n / subst_poly(&self.0.den, map)
    }

    /// Evaluate with variables looked up by name.
    pub fn eval(&self, point: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
        eval::eval_expr(self, &|v| point.get(v).copied())
    }

    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
        eval::eval_expr(self, lookup)
    }

    /// Lower into a fast evaluator over the given variable order.
    pub fn compile(&self, vars: &[String]) -> Result<Compiled, EvalError> {
        Compiled::new(self, vars)
    }

    /// Zero test: exact on the rational core, seeded 20-point numeric test
    /// (absolute tolerance 1e-9) once elementary functions occur.
    pub fn is_identically_zero(&self) -> bool {
        if self.is_zero() {
            return true;
        }
        if !self.has_functions() {
            return false;
        }
        let vars: Vec<String> = self.free_vars().into_iter().collect();
        let Ok(c) = self.compile(&vars) else { return false };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(NUMERIC_ZERO_SEED);
        let mut hits = 0;
        let mut tries = 0;
        while hits < 20 && tries < 200 {
            tries += 1;
            let x: Vec<f64> = vars.iter().map(|_| rng.gen_range(-2.0..2.0)).collect();
            match c.eval(&x) {
                Ok(val) if val.abs() > 1e-9 => return false,
                Ok(_) => hits += 1,
                Err(_) => continue,
            }
        }
        hits == 20
    }

    /// Rational value as a double, if constant.
    pub fn to_f64(&self) -> Option<f64> {
        self.as_rational().map(|q| q_to_f64(&q))
    }
}

pub(crate) const NUMERIC_ZERO_SEED: u64 = 0xA15E_B01D;

fn atom_depends_on(a: &Atom, v: &str) -> bool {
    match a {
        Atom::Var(n) => &**n == v,
        Atom::Func(_, e) => e.depends_on(v),
    }
}

fn diff_atom(a: &Atom, v: &str) -> Expr {
    match a {
        Atom::Var(n) if &**n == v => Expr::one(),
        Atom::Var(_) => Expr::zero(),
        Atom::Func(f, arg) => {
            let inner = arg.diff(v);
            if inner.is_zero() {
                return Expr::zero();
            }
            let outer = match f {
                Func::Sin => arg.cos(),
                Func::Cos => -arg.sin(),
                Func::Exp => arg.exp(),
            };
            outer * inner
        }
    }
}

fn diff_poly(p: &Poly, v: &str) -> Expr {
    // Variable atoms stay polynomial; function atoms may carry quotients.
    let mut plain = Poly::zero();
    let mut other = Expr::zero();
    for (m, c) in &p.terms {
        for (idx, (a, k)) in m.0.iter().enumerate() {
            if !atom_depends_on(a, v) {
                continue;
            }
            let coef = c * Q::from_integer(BigInt::from(*k));
            let rest = m.lowered(idx);
            match a {
                Atom::Var(_) => plain.add_term(rest, coef),
                Atom::Func(..) => {
                    let mut t = Poly::zero();
                    t.add_term(rest, coef);
                    other = other + Expr::from_poly(t) * diff_atom(a, v);
                }
            }
        }
    }
    Expr::from_poly(plain) + other
}

fn subst_atom(a: &Atom, map: &BTreeMap<String, Expr>) -> Expr {
    match a {
        Atom::Var(n) => map.get(&**n).cloned().unwrap_or_else(|| Expr::var(n)),
        Atom::Func(f, e) => Expr::apply(*f, &e.subst(map)),
    }
}

fn subst_poly(p: &Poly, map: &BTreeMap<String, Expr>) -> Expr {
    let mut cache: BTreeMap<&Atom, Expr> = BTreeMap::new();
    let mut acc = Expr::zero();
    for (m, c) in &p.terms {
        let mut t = Expr::rational(c.clone());
        for (a, k) in &m.0 {
            let s = cache.entry(a).or_insert_with(|| subst_atom(a, map)).clone();
            t = t * s.powi(*k as i32);
        }
        acc = acc + t;
    }
    acc
}

// ── arithmetic ────────────────────────────────────────────────────────────

fn add_impl(a: &Expr, b: &Expr) -> Expr {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    if a.is_polynomial() && b.is_polynomial() {
        return Expr::from_poly(a.0.num.add(&b.0.num));
    }
    if a.0.den == b.0.den {
        return Expr::from_parts(a.0.num.add(&b.0.num), a.0.den.clone());
    }
    let num = a.0.num.mul(&b.0.den).add(&b.0.num.mul(&a.0.den));
    Expr::from_parts(num, a.0.den.mul(&b.0.den))
}

fn mul_impl(a: &Expr, b: &Expr) -> Expr {
    if a.is_zero() || b.is_zero() {
        return Expr::zero();
    }
    if a.is_polynomial() && b.is_polynomial() {
        return Expr::from_poly(a.0.num.mul(&b.0.num));
    }
    Expr::from_parts(a.0.num.mul(&b.0.num), a.0.den.mul(&b.0.den))
}

fn div_impl(a: &Expr, b: &Expr) -> Expr {
    assert!(!b.is_zero(), "symbolic division by zero");
    Expr::from_parts(a.0.num.mul(&b.0.den), a.0.den.mul(&b.0.num))
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                $f(&self, &o)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, o: &Expr) -> Expr {
                $f(&self, o)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                $f(self, &o)
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, o: &Expr) -> Expr {
                $f(self, o)
            }
        }
    };
}

fn sub_impl(a: &Expr, b: &Expr) -> Expr {
    add_impl(a, &-b)
}

binop!(Add, add, add_impl);
binop!(Sub, sub, sub_impl);
binop!(Mul, mul, mul_impl);
binop!(Div, div, div_impl);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr(Arc::new(RatFn { num: self.0.num.neg(), den: self.0.den.clone() }))
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.fold(Expr::zero(), |a, b| a + b)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

// ── printing ──────────────────────────────────────────────────────────────

fn fmt_q(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn fmt_atom(a: &Atom) -> String {
    match a {
        Atom::Var(n) => n.to_string(),
        Atom::Func(f, e) => format!("{}({})", f.name(), e),
    }
}

fn fmt_poly(p: &Poly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, (m, c)) in p.terms.iter().rev().enumerate() {
        let neg = c.is_negative();
        let mag = c.abs();
        if i == 0 {
            if neg {
                s.push('-');
            }
        } else {
            s.push_str(if neg { " - " } else { " + " });
        }
        let mono: Vec<String> = m
            .0
            .iter()
            .map(|(a, k)| if *k == 1 { fmt_atom(a) } else { format!("{}^{}", fmt_atom(a), k) })
            .collect();
        if mono.is_empty() {
            s.push_str(&fmt_q(&mag));
        } else if mag.is_one() {
            s.push_str(&mono.join("*"));
        } else {
            s.push_str(&fmt_q(&mag));
            s.push('*');
            s.push_str(&mono.join("*"));
        }
    }
    s
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_polynomial() {
            f.write_str(&fmt_poly(&self.0.num))
        } else {
            write!(f, "({})/({})", fmt_poly(&self.0.num), fmt_poly(&self.0.den))
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// Rational reading of a double: the first p/q with q ≤ 1000 within 1e-12
/// (so 0.1 reads as 1/10), else the exact binary value.
pub fn rational_from_f64(x: f64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    for q in 1..=1000i64 {
        let p = (x * q as f64).round();
        if (p / q as f64 - x).abs() <= 1e-12 * x.abs().max(1.0) && p.abs() < 1e15 {
            return Some(Q::new(BigInt::from(p as i64), BigInt::from(q)));
        }
    }
    Q::from_float(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(names: &[&str]) -> VarEnv {
        let v: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        VarEnv::with(&v, Role::Base).unwrap()
    }

    fn p(s: &str) -> Expr {
        parse(s, &env(&["x1", "x2", "x3", "y"])).unwrap()
    }

    #[test]
    fn cancellation_to_zero() {
        assert!(p("x1 - x1").is_zero());
    }

    #[test]
    fn sum_and_product_shape() {
        assert_eq!(p("x1*x2 + 1/2"), Expr::var("x1") * Expr::var("x2") + Expr::ratio(1, 2));
    }

    #[test]
    fn trig_terms_are_kept() {
        let e = p("sin(x1)^2 + cos(x1)^2");
        assert!(e.as_rational().is_none());
        assert!(!e.is_zero());
        assert!((e - Expr::one()).is_identically_zero());
    }

    #[test]
    fn rational_functions_reduce() {
        assert_eq!(p("(x1^2 - 1)/(x1 - 1)"), p("x1 + 1"));
        assert_eq!(p("x1/x1"), Expr::one());
        assert_eq!(p("1/x1 + 1/x2"), p("(x1 + x2)/(x1*x2)"));
        assert_eq!(p("(2*x1)/(4*x2)"), p("x1/(2*x2)"));
    }

    #[test]
    fn derivatives() {
        assert_eq!(p("x1^2*x2").diff("x1"), p("2*x1*x2"));
        assert_eq!(p("sin(x1)").diff("x1"), p("cos(x1)"));
        assert_eq!(p("exp(x1*x2)").diff("x2"), p("x1*exp(x1*x2)"));
        assert_eq!(p("1/x1").diff("x1"), p("-1/x1^2"));
        assert!(p("cos(x2)").diff("x1").is_zero());
    }

    #[test]
    fn constant_function_arguments_fold_at_zero() {
        assert_eq!(p("exp(0)"), Expr::one());
        assert_eq!(p("sin(x1 - x1)"), Expr::zero());
    }

    #[test]
    fn print_parse_round_trip() {
        for s in ["x1*x2 + 1/2", "-3/4*x1^3 + sin(x2*x1)", "(x1 + 1)/(x2^2 - 3)", "exp(-x1) - 7", "-x1"] {
            let e = p(s);
            assert_eq!(p(&e.to_string()), e, "{s} printed as {e}");
        }
    }

    #[test]
    fn substitution() {
        let mut m = BTreeMap::new();
        m.insert("x1".to_string(), p("x2 + 1"));
        assert_eq!(p("x1^2").subst(&m), p("x2^2 + 2*x2 + 1"));
        assert_eq!(p("sin(x1)").subst(&m), p("sin(x2 + 1)"));
    }

    #[test]
    fn evaluation() {
        let mut pt = BTreeMap::new();
        pt.insert("x1".to_string(), 1.0);
        pt.insert("x2".to_string(), 2.0);
        assert_eq!(p("x1 + x2").eval(&pt).unwrap(), 3.0);
        pt.insert("x1".to_string(), 0.0);
        assert_eq!(p("exp(x1)").eval(&pt).unwrap(), 1.0);
        assert!(matches!(p("1/x1").eval(&pt), Err(EvalError::DivisionByZero(_))));
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(p("0.25*x1"), p("1/4*x1"));
    }
}
