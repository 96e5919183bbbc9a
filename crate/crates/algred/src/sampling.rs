//! Seeded randomness: sample points, random test polynomials, and the
//! residual bookkeeping for symbolic identities.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::{Record, Sample};
use crate::symexpr::{Compiled, Expr};

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Sampler {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream derived from a seed and a label.
    pub fn derived(seed: u64, label: &str) -> Sampler {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        Sampler::new(seed ^ h)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn vector(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| self.uniform(lo, hi)).collect()
    }

    pub fn point_in(&mut self, bx: &[(f64, f64)]) -> Vec<f64> {
        bx.iter().map(|&(lo, hi)| self.uniform(lo, hi)).collect()
    }

    pub fn int(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.gen_range(lo..=hi)
    }

    /// Small random rational p/q with |p| ≤ 9, 1 ≤ q ≤ 4.
    pub fn small_rational(&mut self) -> Expr {
        let p = self.int(-9, 9);
        let q = self.int(1, 4);
        Expr::ratio(p, q)
    }

    /// Random polynomial of total degree ≤ `degree` with integer coefficients in [-3, 3].
    pub fn polynomial(&mut self, vars: &[String], degree: u32) -> Expr {
        let mut acc = Expr::zero();
        for exps in monomials(vars.len(), degree) {
            let c = self.int(-3, 3);
            if c == 0 {
                continue;
            }
            let mut t = Expr::int(c);
            for (v, &k) in vars.iter().zip(&exps) {
                if k > 0 {
                    t = t * Expr::var(v).powi(k as i32);
                }
            }
            acc = acc + t;
        }
        acc
    }

    /// Sample points of `bx` at which every guard evaluates finitely.
    pub fn guarded_points(&mut self, bx: &[(f64, f64)], guards: &[Compiled], count: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut tries = 0;
        while out.len() < count && tries < count * 50 + 100 {
            tries += 1;
            let p = self.point_in(bx);
            if guards.iter().all(|g| g.eval(&p).is_ok_and(|v| v.is_finite())) {
                out.push(p);
            }
        }
        out
    }
}

/// Exponent vectors of total degree ≤ d in n variables, graded order.
pub fn monomials(n: usize, d: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; n]];
    for total in 1..=d {
        let mut cur = vec![0u32; n];
        fill(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if pos == cur.len() {
        if left == 0 {
            out.push(cur.clone());
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        fill(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

/// Record for the claim "every expression in `exprs` vanishes identically".
///
/// Canonical zero decides exactly. A nonzero canonical form without elementary
/// functions is a definite failure. Otherwise the verdict comes from the
/// maximum absolute value over seeded sample points drawn from `ranges`
/// (default [-2, 2] per variable).
pub fn identity_record(
    id: impl Into<String>,
    anchor: &str,
    exprs: &[Expr],
    ranges: &BTreeMap<String, (f64, f64)>,
    seed: u64,
    count: usize,
    tol: f64,
) -> Record {
    let nonzero: Vec<&Expr> = exprs.iter().filter(|e| !e.is_zero()).collect();
    if nonzero.is_empty() {
        return Record::new(id, anchor, Sample::Symbolic, 0.0, tol);
    }
    let rational_failure = nonzero.iter().any(|e| !e.has_functions());
    let mut vars: Vec<String> = nonzero.iter().flat_map(|e| e.free_vars()).collect();
    vars.sort();
    vars.dedup();
    let bx: Vec<(f64, f64)> = vars.iter().map(|v| ranges.get(v).copied().unwrap_or((-2.0, 2.0))).collect();
    let compiled: Vec<Compiled> = nonzero.iter().filter_map(|e| e.compile(&vars).ok()).collect();
    let mut s = Sampler::new(seed);
    let mut worst = 0.0f64;
    let mut worst_pt = Vec::new();
    let mut used = 0;
    let mut tries = 0;
    while used < count.max(1) && tries < 50 * count.max(1) {
        tries += 1;
        let p = s.point_in(&bx);
        let vals: Result<Vec<f64>, _> = compiled.iter().map(|c| c.eval(&p)).collect();
        let Ok(vals) = vals else { continue };
        used += 1;
        for v in vals {
            if v.abs() > worst || worst_pt.is_empty() {
                worst = worst.max(v.abs());
                worst_pt = p.clone();
            }
        }
    }
    if rational_failure {
        let r = if worst == 0.0 { f64::INFINITY } else { worst };
        return Record::verdict(id, anchor, Sample::Point(worst_pt), r, tol, false)
            .with_note("nonzero canonical form");
    }
    Record::new(id, anchor, Sample::Sampled(used), worst, tol)
}
