//! Phase-only analog encoding for distributed estimation with a
//! multi-antenna fusion center.
//!
//! Sensors observe a common complex parameter, rotate their observation by a
//! unit-modulus coefficient and transmit simultaneously. The fusion center
//! knows the channel, picks the phases that minimize the variance of its ML
//! estimate (via a semidefinite relaxation and randomized rounding) and feeds
//! them back. The crate also evaluates the large-N and large-M asymptotic
//! expressions and runs seeded Monte Carlo sweeps over either dimension.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod channel;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod montecarlo;
pub mod phase_opt;
pub mod rng;
pub mod sdp;

pub use channel::{ChannelRealization, Interval, Scenario, ScenarioTemplate};
pub use error::{Error, Result};
pub use estimator::{FisherMatrix, PhaseVector};
pub use montecarlo::{ExperimentConfig, SweepKind, SweepResult};
pub use phase_opt::{OptimizationReport, PhaseStrategy, StrategyKind};
pub use rng::RngStream;
pub use sdp::{SdpProblem, SdpSolution};
