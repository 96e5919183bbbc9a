//! The quotient algebroid A₀ = (A/ψ(g))/G in a trivialization: invariant
//! coordinates r, a section s of the orbit map, and an invariant frame X_γ
//! completing ψ(g) to a frame of A.

use std::collections::BTreeMap;

use super::ReduceError;
use crate::algebroid::{AlgebroidModel, SectionField};
use crate::config::Settings;
use crate::hamiltonian::solve_exprs;
use crate::lifts::LiftAction;
use crate::linalg::Mat;
use crate::model::Trivialization;
use crate::report::{Record, Sample};
use crate::sampling::Sampler;
use crate::symexpr::{Compiled, Expr};

#[derive(Clone, Debug)]
pub struct QuotientModel {
    model: AlgebroidModel,
    parent: AlgebroidModel,
    reduced: Vec<Expr>,
    section: Vec<Expr>,
    frame: Vec<SectionField>,
    /// Rows of [X_γ | ψ_a]⁻¹ that extract frame coefficients.
    projection: Vec<Vec<Expr>>,
    compiled_reduced: Vec<Compiled>,
    compiled_projection: Vec<Vec<Compiled>>,
    compiled_frame: Vec<Vec<Compiled>>,
}

impl QuotientModel {
    pub fn new(act: &LiftAction, triv: &Trivialization) -> Result<QuotientModel, ReduceError> {
        let parent = act.model().clone();
        let (n, d) = (parent.rank(), act.dim());
        let k = n - d;
        if triv.frame.len() != k {
            return Err(ReduceError::Shape(format!("frame has {} sections, expected {k}", triv.frame.len())));
        }
        let frame: Vec<SectionField> = triv.frame.iter().map(|r| parent.section(r.clone())).collect::<Result<_, _>>()?;
        // M has columns X_1..X_k, ψ_1..ψ_d.
        let cols: Vec<&SectionField> = frame.iter().chain(act.psi_all()).collect();
        let m: Vec<Vec<Expr>> = (0..n).map(|i| cols.iter().map(|c| c.comp(i).clone()).collect()).collect();
        let ident: Vec<Vec<Expr>> = (0..n).map(|i| (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect()).collect();
        let inv = solve_exprs(&m, &ident).ok_or(ReduceError::FrameDegenerate)?;
        let projection: Vec<Vec<Expr>> = inv[..k].to_vec();
        let coeffs = |s: &SectionField| -> Vec<Expr> {
            projection.iter().map(|row| row.iter().zip(s.comps()).map(|(a, b)| a * b).sum()).collect()
        };

        for a in 0..d {
            for (g, x) in frame.iter().enumerate() {
                let br = parent.bracket(act.psi(a), x)?;
                if let Some(e) = coeffs(&br).into_iter().find(|e| !e.is_identically_zero()) {
                    return Err(ReduceError::FrameNotInvariant { generator: a + 1, frame: g + 1, residual: e.to_string() });
                }
            }
        }

        let at_section: BTreeMap<String, Expr> = parent.coords().iter().cloned().zip(triv.section.iter().cloned()).collect();
        let rho0: Vec<Vec<Expr>> = frame
            .iter()
            .map(|x| {
                let v = parent.anchor_field(x)?;
                Ok(triv
                    .reduced
                    .iter()
                    .map(|r| parent.coords().iter().zip(&v).map(|(c, vi)| r.diff(c) * vi).sum::<Expr>().subst(&at_section))
                    .collect())
            })
            .collect::<Result<_, ReduceError>>()?;
        let mut c0 = vec![vec![vec![Expr::zero(); k]; k]; k];
        for g in 0..k {
            for h in g + 1..k {
                let br = parent.bracket(&frame[g], &frame[h])?;
                for (e, v) in coeffs(&br).into_iter().enumerate() {
                    let v = v.subst(&at_section);
                    c0[h][g][e] = -&v;
                    c0[g][h][e] = v;
                }
            }
        }
        let mut model = AlgebroidModel::new(triv.reduced_names.clone(), k, rho0, c0)?.validated()?;
        model.set_sample_box(reduced_box(&parent, &triv.reduced)?)?;

        let coords = parent.coords();
        let compile_all = |es: &[Expr]| es.iter().map(|e| e.compile(coords)).collect::<Result<Vec<_>, _>>();
        let compiled_reduced = compile_all(&triv.reduced)?;
        let compiled_projection = projection.iter().map(|r| compile_all(r)).collect::<Result<_, _>>()?;
        let compiled_frame = frame.iter().map(|x| compile_all(x.comps())).collect::<Result<_, _>>()?;
        Ok(QuotientModel {
            model,
            parent,
            reduced: triv.reduced.clone(),
            section: triv.section.clone(),
            frame,
            projection,
            compiled_reduced,
            compiled_projection,
            compiled_frame,
        })
    }

    pub fn model(&self) -> &AlgebroidModel {
        &self.model
    }

    pub fn parent(&self) -> &AlgebroidModel {
        &self.parent
    }

    pub fn reduced(&self) -> &[Expr] {
        &self.reduced
    }

    pub fn section(&self) -> &[Expr] {
        &self.section
    }

    pub fn frame(&self) -> &[SectionField] {
        &self.frame
    }

    /// Symbolic rows of the fiber projection a ↦ frame coefficients of a mod ψ(g).
    pub fn projection(&self) -> &[Vec<Expr>] {
        &self.projection
    }

    /// x ↦ s(q) as a substitution.
    pub fn section_map(&self) -> BTreeMap<String, Expr> {
        self.parent.coords().iter().cloned().zip(self.section.iter().cloned()).collect()
    }

    /// q ↦ r(x) as a substitution.
    pub fn reduced_map(&self) -> BTreeMap<String, Expr> {
        self.model.coords().iter().cloned().zip(self.reduced.iter().cloned()).collect()
    }

    pub fn project_point(&self, x: &[f64]) -> Result<Vec<f64>, ReduceError> {
        Ok(self.compiled_reduced.iter().map(|c| c.eval(x)).collect::<Result<_, _>>()?)
    }

    /// Fiber projection at x as a k×n matrix.
    pub fn projection_at(&self, x: &[f64]) -> Result<Mat, ReduceError> {
        eval_rows(&self.compiled_projection, x, self.parent.rank())
    }

    /// Frame sections at x as an n×k matrix.
    pub fn frame_at(&self, x: &[f64]) -> Result<Mat, ReduceError> {
        Ok(eval_rows(&self.compiled_frame, x, self.parent.rank())?.transpose())
    }

    /// Axioms of A₀, and that brackets and anchors of invariant sections
    /// Σ f_γ(r(x)) X_γ project to those of Σ f_γ(q) e_γ at sampled points of
    /// the parent base, on and off the section.
    pub fn check(&self, settings: &Settings) -> Result<Vec<Record>, ReduceError> {
        let mut out: Vec<Record> = self.model.check_axioms(settings).into_iter().map(|mut r| {
            r.id = format!("quotient/{}", r.id.trim_start_matches("axioms/"));
            r
        }).collect();
        let k = self.model.rank();
        let qn = self.model.coords().to_vec();
        let to_x = self.reduced_map();
        let mut s = Sampler::derived(settings.seed, "quotient");
        let pts = self.parent.sample_points(settings.seed, settings.samples.min(20));
        let (mut br_worst, mut anchor_worst) = (0.0f64, 0.0f64);
        for _ in 0..3 {
            let fs: Vec<Expr> = (0..k).map(|_| s.polynomial(&qn, 1)).collect();
            let gs: Vec<Expr> = (0..k).map(|_| s.polynomial(&qn, 1)).collect();
            let lift = |c: &[Expr]| -> SectionField {
                self.frame.iter().zip(c).fold(self.parent.zero_section(), |acc, (x, f)| acc.add(&x.scale(&f.subst(&to_x))))
            };
            let (u, v) = (lift(&fs), lift(&gs));
            let (u0, v0) = (self.model.section(fs.clone())?, self.model.section(gs.clone())?);
            let br = self.parent.bracket(&u, &v)?;
            let br0 = self.model.bracket(&u0, &v0)?;
            let br_c = br.comps().iter().map(|e| e.compile(self.parent.coords())).collect::<Result<Vec<_>, _>>()?;
            let br0_c = br0.comps().iter().map(|e| e.compile(&qn)).collect::<Result<Vec<_>, _>>()?;
            let anc = self.parent.anchor_field(&u)?;
            let anc_r: Vec<Compiled> = self
                .reduced
                .iter()
                .map(|r| self.parent.coords().iter().zip(&anc).map(|(c, a)| r.diff(c) * a).sum::<Expr>().compile(self.parent.coords()))
                .collect::<Result<_, _>>()?;
            let anc0 = self.model.anchor_field(&u0)?.iter().map(|e| e.compile(&qn)).collect::<Result<Vec<_>, _>>()?;
            for x in &pts {
                let q = self.project_point(x)?;
                let p = self.projection_at(x)?;
                let b = nalgebra::DVector::from_iterator(br_c.len(), br_c.iter().map(|c| c.eval(x).unwrap_or(f64::NAN)));
                let lhs = p * b;
                for (g, c) in br0_c.iter().enumerate() {
                    br_worst = br_worst.max((lhs[g] - c.eval(&q)?).abs());
                }
                for (a, c) in anc_r.iter().zip(&anc0) {
                    anchor_worst = anchor_worst.max((a.eval(x)? - c.eval(&q)?).abs());
                }
            }
        }
        let n = Sample::Sampled(pts.len());
        out.push(Record::new("quotient/bracket-projects", "quotient-bracket-of-invariant-sections", n.clone(), br_worst, settings.tol.orbit_invariance));
        out.push(Record::new("quotient/anchor-projects", "quotient-anchor-of-invariant-sections", n, anchor_worst, settings.tol.orbit_invariance));
        Ok(out)
    }
}

fn eval_rows(rows: &[Vec<Compiled>], x: &[f64], ncols: usize) -> Result<Mat, ReduceError> {
    let mut m = Mat::zeros(rows.len(), ncols);
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in r.iter().enumerate() {
            m[(i, j)] = c.eval(x)?;
        }
    }
    Ok(m)
}

/// Range of the invariant coordinates over sampled parent points.
fn reduced_box(parent: &AlgebroidModel, reduced: &[Expr]) -> Result<Vec<(f64, f64)>, ReduceError> {
    let pts = parent.sample_points(0x5eed, 200);
    let mut out = Vec::with_capacity(reduced.len());
    for r in reduced {
        let c = r.compile(parent.coords())?;
        let vals: Vec<f64> = pts.iter().filter_map(|p| c.eval(p).ok()).filter(|v| v.is_finite()).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(if lo < hi { (lo, hi) } else { (-1.0, 1.0) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn quotient(name: &str) -> QuotientModel {
        let f = fixtures::load(name).unwrap();
        let act = f.action.clone().unwrap().validated().unwrap();
        QuotientModel::new(&act, f.trivialization.as_ref().unwrap()).unwrap()
    }

    #[test]
    fn translation_quotient_is_tangent_line() {
        let q = quotient("fix-tm2-translation");
        assert_eq!(q.model().rank(), 1);
        assert_eq!(q.model().rho(0, 0), &Expr::one());
        assert!(q.check(&Settings::default()).unwrap().iter().all(|r| r.pass));
    }

    #[test]
    fn magnetic_quotient_is_tangent_plane() {
        let q = quotient("fix-mag");
        assert_eq!(q.model().rank(), 2);
        for g in 0..2 {
            for h in 0..2 {
                for e in 0..2 {
                    assert!(q.model().c(g, h, e).is_zero());
                }
            }
        }
        assert!(q.check(&Settings::default()).unwrap().iter().all(|r| r.pass));
    }

    #[test]
    fn affine_quotient_checks_pass() {
        let q = quotient("fix-act");
        let recs = q.check(&Settings::default()).unwrap();
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
    }

    #[test]
    fn non_invariant_frame_is_rejected() {
        let mut f = fixtures::load("fix-mag").unwrap();
        // ⟦∂3, x3 ∂1 + ∂2⟧ = ∂1 has a frame part.
        f.trivialization.as_mut().unwrap().frame[1] = vec![Expr::var("x3"), Expr::one(), Expr::zero()];
        let act = f.action.clone().unwrap().validated().unwrap();
        let err = QuotientModel::new(&act, f.trivialization.as_ref().unwrap()).unwrap_err();
        assert!(matches!(err, ReduceError::FrameNotInvariant { .. }), "{err}");
    }
}
