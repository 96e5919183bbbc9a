//! Numeric evaluation: a direct evaluator for one-off lookups and a compiled
//! form with double coefficients for hot loops (sampling, integration).

use std::collections::BTreeMap;

use thiserror::Error;

use super::poly::{q_to_f64, Atom, Func, Poly};
use super::Expr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
}

fn eval_poly(p: &Poly, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
    let mut cache: BTreeMap<&Atom, f64> = BTreeMap::new();
    let mut acc = 0.0;
    for (m, c) in &p.terms {
        let mut t = q_to_f64(c);
        for (a, k) in &m.0 {
            let v = match cache.get(a) {
                Some(v) => *v,
                None => {
                    let v = match a {
                        Atom::Var(n) => lookup(n).ok_or_else(|| EvalError::Unbound(n.to_string()))?,
                        Atom::Func(f, e) => f.apply(eval_expr(e, lookup)?),
                    };
                    cache.insert(a, v);
                    v
                }
            };
            t *= v.powi(*k as i32);
        }
        acc += t;
    }
    Ok(acc)
}

pub(super) fn eval_expr(e: &Expr, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
    let n = eval_poly(e.numer(), lookup)?;
    if e.is_polynomial() {
        return Ok(n);
    }
    let d = eval_poly(e.denom(), lookup)?;
    if d == 0.0 || !d.is_finite() {
        return Err(EvalError::DivisionByZero(Expr::from_poly(e.denom().clone()).to_string()));
    }
    Ok(n / d)
}

#[derive(Clone, Debug)]
enum Slot {
    Var(usize),
    Func(Func, Box<Compiled>),
}

#[derive(Clone, Debug)]
struct CPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CPoly {
    fn eval(&self, atoms: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, m) in &self.terms {
            let mut t = *c;
            for &(a, k) in m {
                t *= if k == 1 { atoms[a] } else { atoms[a].powi(k) };
            }
            acc += t;
        }
        acc
    }
}

/// An expression lowered to double arithmetic over a fixed variable order.
#[derive(Clone, Debug)]
pub struct Compiled {
    slots: Vec<Slot>,
    num: CPoly,
    den: Option<CPoly>,
    den_text: String,
}

impl Compiled {
    pub fn new(e: &Expr, vars: &[String]) -> Result<Compiled, EvalError> {
        let mut slots: Vec<Slot> = Vec::new();
        let mut index: BTreeMap<Atom, usize> = BTreeMap::new();
        let mut lower = |p: &Poly| -> Result<CPoly, EvalError> {
            let mut terms = Vec::with_capacity(p.terms.len());
            for (m, c) in &p.terms {
                let mut mono = Vec::with_capacity(m.0.len());
                for (a, k) in &m.0 {
                    let id = match index.get(a) {
                        Some(i) => *i,
                        None => {
                            let s = match a {
                                Atom::Var(n) => Slot::Var(
                                    vars.iter()
                                        .position(|v| v == &**n)
                                        .ok_or_else(|| EvalError::Unbound(n.to_string()))?,
                                ),
                                Atom::Func(f, arg) => Slot::Func(*f, Box::new(Compiled::new(arg, vars)?)),
                            };
                            slots.push(s);
                            index.insert(a.clone(), slots.len() - 1);
                            slots.len() - 1
                        }
                    };
                    mono.push((id, *k as i32));
                }
                terms.push((q_to_f64(c), mono));
            }
            Ok(CPoly { terms })
        };
        let num = lower(e.numer())?;
        let den = if e.is_polynomial() { None } else { Some(lower(e.denom())?) };
        let den_text = if e.is_polynomial() { String::new() } else { Expr::from_poly(e.denom().clone()).to_string() };
        Ok(Compiled { slots, num, den, den_text })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut atoms = [0.0f64; 16];
        let mut heap;
        let buf: &mut [f64] = if self.slots.len() <= 16 {
            &mut atoms[..self.slots.len()]
        } else {
            heap = vec![0.0; self.slots.len()];
            &mut heap
        };
        for (i, s) in self.slots.iter().enumerate() {
            buf[i] = match s {
                Slot::Var(j) => x[*j],
                Slot::Func(f, c) => f.apply(c.eval(x)?),
            };
        }
        let n = self.num.eval(buf);
        match &self.den {
            None => Ok(n),
            Some(d) => {
                let d = d.eval(buf);
                if d == 0.0 || !d.is_finite() {
                    Err(EvalError::DivisionByZero(self.den_text.clone()))
                } else {
                    Ok(n / d)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{parse, Role, VarEnv};

    #[test]
    fn compiled_matches_direct() {
        let vars = vec!["a".to_string(), "b".to_string()];
        let env = VarEnv::with(&vars, Role::Base).unwrap();
        let e = parse("(a^2*sin(b) + exp(a*b))/(1 + b^2)", &env).unwrap();
        let c = e.compile(&vars).unwrap();
        for &(a, b) in &[(0.3, -1.2), (1.7, 0.4), (-2.0, 2.0)] {
            let mut pt = BTreeMap::new();
            pt.insert("a".to_string(), a);
            pt.insert("b".to_string(), b);
            let d = e.eval(&pt).unwrap();
            assert!((c.eval(&[a, b]).unwrap() - d).abs() < 1e-13 * d.abs().max(1.0));
        }
    }

    #[test]
    fn compiled_reports_zero_denominator() {
        let vars = vec!["a".to_string()];
        let env = VarEnv::with(&vars, Role::Base).unwrap();
        let e = parse("1/(a - 1)", &env).unwrap();
        assert_eq!(e.compile(&vars).unwrap().eval(&[1.0]), Err(EvalError::DivisionByZero("a - 1".into())));
    }
}
