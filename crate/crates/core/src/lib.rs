//! Reliability and hazard dynamics of a two-site spin chain under local
//! amplitude damping.
//!
//! The system starts in `|11⟩`; failure means reaching the ground state.
//! The crate provides
//!
//! * the Lindblad master equation and its reduced 4-variable form
//!   ([`liouville`]),
//! * closed-form survival `R(t)` and hazard `h(t)` in every regime
//!   ([`closedform`]),
//! * counting of hazard extrema and the phase structure of the overdamped
//!   regime ([`extrema`]),
//! * Monte Carlo first-passage estimators under stroboscopic monitoring
//!   ([`fpt`]).
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the double-precision instantiation.
//!
//! ```
//! use spinrel::{hazard_analytic, reliability_analytic, Params64};
//!
//! let p = Params64::new(0.5, 3.0, 0.5).unwrap();
//! assert!((reliability_analytic(&p, 0.0) - 1.0).abs() < 1e-15);
//! // overdamped plateau γ̄ - Λ/2
//! assert!((hazard_analytic(&p, 20.0) - 1.0).abs() < 1e-3);
//! ```

// Index loops read closer to the matrix algebra; `!(x > 0)` guards also reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod extrema;
pub mod fpt;
pub mod liouville;
pub mod model;
pub mod poly;
pub mod scalar;

use thiserror::Error;

pub use closedform::{
    eigen_modes, failure_density_analytic, hazard_analytic, hazard_asymptote, reliability_analytic,
    reliability_and_hazard, HazardAsymptote, ModeDecomposition, ModeError,
};
pub use extrema::{
    count_hazard_extrema, critical_x_k2, f_extremum, g_of_u, integer_k_curve, phase_map,
    quartic_k2, ExtremaError, ExtremumReport, PhaseCell, PhaseClass, PhaseGrid, PhaseMap,
    ScanConfig,
};
pub use fpt::{
    bin_probabilities, estimate, hazard_variance_theory, sample_first_passage, sample_with_source,
    variance_experiment, CounterRng, EstimateSeries, FptError, FptSampleSet, MonitoringConfig,
    UniformSource, VarianceRow, VarianceTheory,
};
pub use liouville::{
    build_a, evolve_master, evolve_reduced, hazard_numeric, integrate_reduced, lindblad_rhs,
    reliability_numeric, BasisState, DensityMatrix, LiouvilleError, MasterTrajectory, ReducedState,
    ReducedTrajectory,
};
pub use model::{classify_regime, derived_values, DerivedParams, ModelParams, ParamError, Regime};
pub use scalar::Real;

pub type Params64 = ModelParams<f64>;
pub type Params32 = ModelParams<f32>;
pub type Derived64 = DerivedParams<f64>;
pub type Density64 = DensityMatrix<f64>;
pub type Reduced64 = ReducedState<f64>;
pub type ReducedTrajectory64 = ReducedTrajectory<f64>;
pub type Modes64 = ModeDecomposition<f64>;
pub type Monitoring64 = MonitoringConfig<f64>;
pub type Samples64 = FptSampleSet<f64>;
pub type Estimates64 = EstimateSeries<f64>;

/// Any failure raised by the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Liouville(#[from] LiouvilleError),
    #[error(transparent)]
    Mode(#[from] ModeError),
    #[error(transparent)]
    Extrema(#[from] ExtremaError),
    #[error(transparent)]
    Fpt(#[from] FptError),
}
