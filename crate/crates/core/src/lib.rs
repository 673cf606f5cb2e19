//! Integrodifference model of a partially sedentary, age-structured population.
//!
//! Each generation the density `u` is mapped to
//!
//! ```text
//! Q[u](x) = s(1-p_A) u(x) + (1-p_J) F(u(x))
//!         + s p_A (K_A * u)(x) + p_J (K_J * F(u))(x)
//! ```
//!
//! where `s` is adult survival, `F` the fecundity map, `p_A`/`p_J` the
//! dispersing fractions and `K_A`/`K_J` symmetric dispersal kernels. The crate
//! evaluates `Q` and its traveling-frame pieces on a truncated uniform grid,
//! computes the analytic spreading speed, constructs monotone traveling waves
//! by monotone iteration and checks them against direct simulation.
//!
//! The crate is `no_std` (it needs `alloc`). File formats and the command line
//! front end live in the `idewave` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod model;
pub mod operators;
pub mod spatial;

pub use analysis::{
    construct_wave, initial_phi, kappa, simulate, spreading_speed, track_front, verify_wave,
    weinberger_limit, AnalysisError, DegenerateKind, FrontTrace, SpeedResult, TailModel,
    VerificationReport, VerifyOptions, WaveOptions, WaveProfile, WeinbergerLimit,
};
pub use model::{
    beverton_holt, growth_lipschitz_bound, validate_fecundity, validate_params, Check, Fecundity,
    FecundityTable, ModelError, ModelParams, ValidationReport,
};
pub use operators::{GcSolution, OperatorContext, OperatorError};
pub use spatial::{
    convolve, shift_sample, Convolution, DensityField, Grid, KernelSpec, KernelTable, SpatialError,
    Stencil,
};
