//! Run settings and every numeric tolerance in one place.

use serde::Serialize;

/// Default sampling seed.
pub const DEFAULT_SEED: u64 = 0xA15E_B01D;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Sampled residual of an identity whose zero test left the rational core.
    pub sampled_identity: f64,
    /// Relative singular-value cutoff for kernels, ranks and complements.
    pub svd_rel: f64,
    /// Relative cutoff for the full-rank regularity test of a momentum map.
    pub regular_rank_rel: f64,
    /// Rank tolerance for subspace identities.
    pub subspace: f64,
    /// Nondegeneracy threshold for |det| after row-norm scaling.
    pub nondegenerate_det: f64,
    /// Distance allowed between J(x) and the requested level.
    pub level_set: f64,
    /// Group-level identities evaluated through matrix exponentials.
    pub group: f64,
    /// Flow-based equivariance and duality checks.
    pub flow: f64,
    /// Well-definedness of orbit-invariant maps under flows.
    pub orbit_invariance: f64,
    /// Finite-difference comparisons.
    pub finite_difference: f64,
    /// Agreement of reduced forms under re-chosen representatives.
    pub well_defined: f64,
    /// Reduced Poisson bracket agreement.
    pub reduced_bracket: f64,
    /// Pointwise pullback identities of the cotangent reduction cases.
    pub pullback: f64,
    /// Casimir drift along a trajectory.
    pub casimir: f64,
    /// Momentum drift along an invariant Hamiltonian trajectory.
    pub momentum_drift: f64,
    /// Distance between projected and reduced trajectories.
    pub reduced_trajectory: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sampled_identity: 1e-9,
            svd_rel: 1e-10,
            regular_rank_rel: 1e-8,
            subspace: 1e-8,
            nondegenerate_det: 1e-10,
            level_set: 1e-9,
            group: 1e-10,
            flow: 1e-6,
            orbit_invariance: 1e-8,
            finite_difference: 1e-5,
            well_defined: 1e-9,
            reduced_bracket: 1e-6,
            pullback: 1e-8,
            casimir: 1e-8,
            momentum_drift: 1e-6,
            reduced_trajectory: 1e-5,
        }
    }
}

impl Tolerances {
    /// Every tolerance multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Tolerances {
        Tolerances {
            sampled_identity: self.sampled_identity * k,
            svd_rel: self.svd_rel * k,
            regular_rank_rel: self.regular_rank_rel * k,
            subspace: self.subspace * k,
            nondegenerate_det: self.nondegenerate_det * k,
            level_set: self.level_set * k,
            group: self.group * k,
            flow: self.flow * k,
            orbit_invariance: self.orbit_invariance * k,
            finite_difference: self.finite_difference * k,
            well_defined: self.well_defined * k,
            reduced_bracket: self.reduced_bracket * k,
            pullback: self.pullback * k,
            casimir: self.casimir * k,
            momentum_drift: self.momentum_drift * k,
            reduced_trajectory: self.reduced_trajectory * k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub seed: u64,
    /// Sample count for symbolic-identity fallbacks and base sampling.
    pub samples: usize,
    /// Sample count for the pointwise reduction checks.
    pub reduction_samples: usize,
    /// Fixed RK4 step.
    pub step: f64,
    pub tol: Tolerances,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { seed: DEFAULT_SEED, samples: 50, reduction_samples: 30, step: 1e-3, tol: Tolerances::default() }
    }
}

impl Settings {
    pub fn with_tol_scale(mut self, k: f64) -> Settings {
        self.tol = Tolerances::default().scaled(k);
        self
    }
}
