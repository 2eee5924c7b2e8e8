//! Random Fourier feature models fit from samples drawn by Christoffel
//! densities, with i.i.d. sampling as the baseline.
//!
//! The crate provides product measures with closed-form Gram entries,
//! random Fourier feature systems, OMP/HTP sparse solvers, orthonormal bases
//! and Christoffel functions over feature spans, a random-walk Metropolis
//! sampler, the adaptive sampling loop with its i.i.d. baseline, and the
//! benchmark targets.

pub mod cas;
pub mod christoffel;
pub mod error;
pub mod features;
pub mod linalg;
pub mod measures;
pub mod mh_sampler;
pub mod ode;
pub mod points;
pub mod sparse_recovery;
pub mod targets;

pub use cas::{
    boost_draw, geometric_stats, run_cas, run_nas, ArmRun, BoostOutcome, CasConfig, IterationRecord, MhSettings,
    TestSet,
};
pub use christoffel::{build_basis, gram_matrix, OrthonormalBasis, Truncation, Weight};
pub use error::{Error, Result};
pub use features::{eval_feature, CMatrix, CVector, FeatureSet, FeatureSystem};
pub use measures::{Law, Measure};
pub use mh_sampler::{mh_sample, tune_sigma1, AcceptanceBand, MhConfig, MhResult, TuneConfig, TuneResult};
pub use num_complex::Complex64;
pub use ode::{integrate_ode, OdeOptions, OdeProblem};
pub use points::Points;
pub use sparse_recovery::{htp, omp, solve_normalized, HtpParams, SolverKind, SparseSolution};
pub use targets::{TargetFunction, TargetKind, REGISTERED_TARGETS};
