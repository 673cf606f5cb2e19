//! Spreading speed, traveling waves and direct simulation.

mod simulate;
mod speed;
mod wave;

pub use simulate::{simulate, track_front, FrontTrace};
pub use speed::{kappa, spreading_speed, SpeedResult, DEFAULT_MU_MAX, DEFAULT_SPEED_TOL};
pub use wave::{
    aligned_grid, construct_wave, initial_phi, verify_wave, weinberger_limit, DegenerateKind,
    TailModel, VerificationReport, VerifyOptions, WaveOptions, WaveProfile, WeinbergerLimit,
};

use alloc::string::String;

use thiserror::Error;

use crate::operators::OperatorError;
use crate::spatial::SpatialError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(
        "speed minimizer at the edge of the search interval: mu = {mu}, c(mu) = {c}{}",
        if *clipped { " (interval clipped to the kernel MGF domain)" } else { "" }
    )]
    MinimizerAtBoundary { mu: f64, c: f64, clipped: bool },
    #[error("degenerate wave ({kind}): sup W = {sup}, inf W = {inf}")]
    DegenerateWave {
        kind: DegenerateKind,
        sup: f64,
        inf: f64,
    },
    #[error(
        "{stage} did not converge after {iterations} iterations (last increment {increment:e})"
    )]
    NoConvergence {
        stage: &'static str,
        iterations: usize,
        increment: f64,
    },
    #[error("generation {generation} does not cross the tracking level")]
    LevelNotCrossed { generation: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
