//! Symplectic reduction at a regular value: the reduced fiber K/G_μ with its
//! form, the reduced bracket, quotient algebroids and the cotangent cases.

mod cotangent;
mod dynamics;
mod poisson;
mod quotient;

pub use cotangent::{check_general_embedding, check_mu_zero, check_shifted, MagneticTerm};
pub use dynamics::{check_dynamics, check_reduced_form_closed, integrate, reduced_form, ReducedSystem, Trajectory};
pub use poisson::{check_reduced_bracket, level_coordinates, level_invariants};
pub use quotient::QuotientModel;

use thiserror::Error;

use crate::algebroid::{AlgebroidError, AlgebroidModel};
use crate::config::Settings;
use crate::hamiltonian::{HamError, MomentumMap, SymplecticSection};
use crate::lifts::{dual_chart, LiftAction, LiftError};
use crate::linalg::{complement_within, containment_residual, null_space, orth, scaled_det, Mat, Vector};
use crate::model::{Fixture, ModelError};
use crate::prolong::{build_prolongation_named, ProlongError, ProlongedModel};
use crate::report::{Record, Sample};
use crate::sampling::Sampler;
use crate::symexpr::{Compiled, EvalError, Expr};

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Ham(#[from] HamError),
    #[error(transparent)]
    Prolong(#[from] ProlongError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("no points of J⁻¹(μ) found in the sample box")]
    EmptyLevelSet,
    #[error("frame section {frame} is not invariant: the bracket with ψ_{generator} has a frame part {residual}")]
    FrameNotInvariant { generator: usize, frame: usize, residual: String },
    #[error("frame and generators do not span the fiber at the section")]
    FrameDegenerate,
    #[error("{0} needs the full group to fix μ (dim g_μ = {1}, dim g = {2})")]
    Isotropy(&'static str, usize, usize),
    #[error("{0} needs the cotangent setting (a model without [omega])")]
    NeedsCotangent(&'static str),
}

/// The symplectic data that reduction runs on.
///
/// With an `[omega]` section the fixture's own algebroid is used. Otherwise the
/// prolongation over the dual with its canonical form and the lifted action.
#[derive(Clone, Debug)]
pub struct Setting {
    pub parent: AlgebroidModel,
    pub parent_action: LiftAction,
    pub prolonged: Option<ProlongedModel>,
    pub omega: SymplecticSection,
    pub momentum: MomentumMap,
}

/// K/G_μ at one point, through an orthonormal complement Q of G_μ in K.
#[derive(Clone, Debug)]
pub struct ReducedFiber {
    pub point: Vec<f64>,
    /// ker(TJ∘ρ), orthonormal columns.
    pub k: Mat,
    /// ψ(g_μ), orthonormal columns.
    pub g: Mat,
    pub q: Mat,
    /// Ω at the point.
    pub w: Mat,
    /// Ω_μ = QᵀΩQ.
    pub omega: Mat,
}

impl Setting {
    pub fn from_fixture(f: &Fixture) -> Result<Setting, ReduceError> {
        let parent = f.model.clone().validated()?;
        let parent_action = f.require_action()?.clone().validated()?;
        match &f.omega {
            Some(w) => {
                let comps = f.momentum.clone().ok_or(ModelError::Missing { name: f.name.clone(), section: "momentum" })?;
                let momentum = MomentumMap::new(parent_action.clone(), comps)?;
                Ok(Setting { parent, parent_action, prolonged: None, omega: w.clone(), momentum })
            }
            None => {
                let (_, y) = dual_chart(&parent);
                let p = build_prolongation_named(&parent, y, f.fiber_box)?;
                Setting::cotangent(p, parent_action)
            }
        }
    }

    pub fn cotangent(p: ProlongedModel, parent_action: LiftAction) -> Result<Setting, ReduceError> {
        let omega = p.omega()?;
        let momentum = p.momentum(&parent_action)?;
        Ok(Setting { parent: p.parent().clone(), parent_action, prolonged: Some(p), omega, momentum })
    }

    pub fn model(&self) -> &AlgebroidModel {
        self.omega.model()
    }

    pub fn action(&self) -> &LiftAction {
        self.momentum.action()
    }

    pub fn require_prolonged(&self, what: &'static str) -> Result<&ProlongedModel, ReduceError> {
        self.prolonged.as_ref().ok_or(ReduceError::NeedsCotangent(what))
    }

    /// Seeded points of J⁻¹(μ).
    pub fn level_points(&self, mu: &[f64], count: usize, settings: &Settings) -> Result<Vec<Vec<f64>>, ReduceError> {
        let pts = self.momentum.level_set_points(mu, count, settings.seed, settings);
        if pts.is_empty() {
            return Err(ReduceError::EmptyLevelSet);
        }
        Ok(pts)
    }

    /// Basis of g_μ as columns.
    pub fn isotropy(&self, mu: &[f64], settings: &Settings) -> Mat {
        self.action().algebra().isotropy_subalgebra(mu, settings.tol.regular_rank_rel)
    }

    pub fn reduce_fiber(&self, mu: &[f64], x: &[f64], settings: &Settings) -> Result<ReducedFiber, ReduceError> {
        let rel = settings.tol.svd_rel;
        let k = self.momentum.level_set_fiber(mu, x, settings)?;
        let g = orth(&(self.action().psi_matrix(x)? * self.isotropy(mu, settings)), rel);
        let q = complement_within(&k, &g, rel);
        let w = self.omega.matrix_at(x)?;
        let omega = q.transpose() * &w * &q;
        Ok(ReducedFiber { point: x.to_vec(), k, g, q, w, omega })
    }

    /// Reduction of the fiber at sampled points of J⁻¹(μ): G_μ ⊆ K, the kernel of
    /// Ω on K is exactly G_μ, the quotient form is nondegenerate of even
    /// rank, and it does not depend on the chosen representatives.
    pub fn check_fibers(&self, mu: &[f64], pts: &[Vec<f64>], settings: &Settings) -> Result<Vec<Record>, ReduceError> {
        let rel = settings.tol.regular_rank_rel;
        let mut s = Sampler::derived(settings.seed, "well-defined");
        let (mut inside, mut kernel, mut det, mut wd) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
        let mut dims = Vec::new();
        for x in pts {
            let rf = self.reduce_fiber(mu, x, settings)?;
            inside = inside.max(containment_residual(&rf.k, &rf.g, rel));
            let on_k = rf.k.transpose() * &rf.w * &rf.k;
            let ker = &rf.k * null_space(&on_k, rel);
            kernel = kernel.max(subspace_distance(&ker, &rf.g, rel));
            det = det.min(scaled_det(&rf.omega).abs());
            wd = wd.max(rf.well_defined_residual(&mut s, 5));
            dims.push(rf.q.ncols());
        }
        let n = Sample::Sampled(pts.len());
        let sub = settings.tol.subspace;
        let even = dims.iter().all(|d| d % 2 == 0);
        let constant = dims.windows(2).all(|w| w[0] == w[1]);
        let dim_note = format!("dim K/G_μ = {}", dims.first().copied().unwrap_or(0));
        Ok(vec![
            Record::new("reduce/isotropy-in-kernel", "isotropy-orbit-tangent-to-level-set", n.clone(), inside, sub),
            Record::new("reduce/kernel-is-isotropy", "kernel-of-restricted-form-is-isotropy-orbit", n.clone(), kernel, sub),
            Record::verdict("reduce/nondegenerate", "reduced-form-nondegenerate", n.clone(), det, settings.tol.nondegenerate_det, det > settings.tol.nondegenerate_det),
            Record::verdict("reduce/even-dimension", "reduced-fiber-even-dimensional", n.clone(), 0.0, 0.0, even && constant).with_note(dim_note),
            Record::new("reduce/well-defined", "reduced-form-independent-of-representatives", n, wd, settings.tol.well_defined),
        ])
    }
}

impl ReducedFiber {
    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    /// Re-chooses representatives Q' = K·R + G·S with random R, S and compares
    /// Q'ᵀΩQ' with the pullback of Ω_μ through the class map T = QᵀQ'.
    pub fn well_defined_residual(&self, s: &mut Sampler, reps: usize) -> f64 {
        let dq = self.dim();
        let mut worst = 0.0f64;
        for _ in 0..reps {
            let r = Mat::from_fn(self.k.ncols(), dq, |_, _| s.uniform(-1.0, 1.0));
            let g = Mat::from_fn(self.g.ncols(), dq, |_, _| s.uniform(-1.0, 1.0));
            let q2 = &self.k * r + &self.g * g;
            let t = self.q.transpose() * &q2;
            let lhs = q2.transpose() * &self.w * &q2;
            let rhs = t.transpose() * &self.omega * &t;
            worst = worst.max(crate::linalg::max_abs(&(lhs - rhs)));
        }
        worst
    }
}

/// Compiled components (d_A f)_I = ρ_I(f).
pub(crate) fn differential(model: &AlgebroidModel, f: &Expr) -> Result<Vec<Compiled>, EvalError> {
    (0..model.rank()).map(|i| model.basis_anchor_apply(i, f).compile(model.coords())).collect()
}

pub(crate) fn eval_vec(cs: &[Compiled], x: &[f64]) -> Result<Vector, EvalError> {
    Ok(Vector::from_iterator(cs.len(), cs.iter().map(|c| c.eval(x)).collect::<Result<Vec<_>, _>>()?))
}

/// Largest containment residual in either direction, 1 on a dimension mismatch.
pub(crate) fn subspace_distance(u: &Mat, w: &Mat, rel: f64) -> f64 {
    let (ou, ow) = (orth(u, rel), orth(w, rel));
    if ou.ncols() != ow.ncols() {
        return 1.0;
    }
    containment_residual(&ou, &ow, rel).max(containment_residual(&ow, &ou, rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn fiber_dims(name: &str) -> (usize, Vec<Record>) {
        let f = fixtures::load(name).unwrap();
        let s = Settings::default();
        let set = Setting::from_fixture(&f).unwrap();
        let mu = f.mu.clone().unwrap();
        let pts = set.level_points(&mu, 8, &s).unwrap();
        let rf = set.reduce_fiber(&mu, &pts[0], &s).unwrap();
        (rf.dim(), set.check_fibers(&mu, &pts, &s).unwrap())
    }

    #[test]
    fn translation_reduces_to_plane() {
        let (d, recs) = fiber_dims("fix-tm2-translation");
        assert_eq!(d, 2);
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
    }

    #[test]
    fn rigid_body_sphere_point_reduces_to_sphere_tangent() {
        // J⁻¹(μ) is a single covector, K is spanned by the three X directions
        // and G_μ is the line of rotations about μ.
        let (d, recs) = fiber_dims("fix-so3");
        assert_eq!(d, 2);
        assert!(recs.iter().all(|r| r.pass), "{recs:?}");
    }

    #[test]
    fn affine_and_magnetic_fibers() {
        for name in ["fix-act", "fix-mag", "fix-so3-act"] {
            let (_, recs) = fiber_dims(name);
            assert!(recs.iter().all(|r| r.pass), "{name}: {recs:?}");
        }
    }
}
