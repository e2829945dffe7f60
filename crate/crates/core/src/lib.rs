//! Search for static quartic trapping potentials that maximize the coherence length
//! or the coherent cubicity of a levitated particle under position-dependent dephasing,
//! plus a small-scale density-matrix simulator for cross-checks.

pub mod classical;
pub mod cubicity;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod model;
pub mod numeric;
pub mod ode;
pub mod optimizer;
pub mod qsim;

pub use classical::{
    constraint_report, gas_collision_time, integrate_trajectory, period_oracle, FeasibilityReport, PhasePoint,
    Trajectory,
};
pub use cubicity::{
    coherent_cubicity_merit, cubicity_trace, propagate_symplectic, quadrature_decomposition, CubicityTrace,
    FrameTrace, SymplecticState,
};
pub use error::{Error, Result};
pub use gaussian::{
    coherence_length, max_coherence_length, principal_axes, propagate_covariance, purity, verify_coherence_relation,
    CovarianceState, GaussianTrace,
};
pub use optimizer::{
    evaluate_candidate, optimize, CandidateOutcome, MeritKind, OptimizationProblem, OptimizationResult, ResultDocument,
};
pub use model::{dephasing_rate, potential_value, taylor_coefficients, NoiseModel, QuarticPotential, SignPair, SystemParams};
