//! Estimation of time-dependent cumulative incidences and treatment effects
//! in two-arm randomized trials with one time-to-event intercurrent event,
//! under the five ICH E9(R1) strategies: treatment policy, composite
//! variable, while on treatment, hypothetical (two scenarios) and principal
//! stratum. Also: pointwise confidence intervals, log-rank tests on the
//! applicable timelines, and a simulation engine with closed-form truths.
//!
//! The estimation core is generic over the scalar type via [`num::Real`]
//! (`f32` or `f64`); the aliases below fix `f64`, and the simulation module
//! is `f64`-only.

pub mod counting;
pub mod data;
pub mod error;
pub mod estimands;
pub mod hazard;
pub mod logrank;
pub mod num;
pub mod sim;
pub mod step;

pub use error::{Error, Result};
pub use estimands::{StrategyKind, SurvivalTransform};
pub use logrank::TestKind;

/// `f64` aliases for the generic core types.
pub type Dataset = data::Dataset<f64>;
pub type SubjectRecord = data::SubjectRecord<f64>;
pub type ReducedRecord = data::ReducedRecord<f64>;
pub type TrialProcesses = counting::TrialProcesses<f64>;
pub type ArmProcesses = counting::ArmProcesses<f64>;
pub type CumulativeHazard = hazard::CumulativeHazard<f64>;
pub type ArmHazards = hazard::ArmHazards<f64>;
pub type Analysis = estimands::Analysis<f64>;
pub type IncidenceResult = estimands::IncidenceResult<f64>;
pub type EffectResult = estimands::EffectResult<f64>;
pub type StrategyEstimate = estimands::StrategyEstimate<f64>;
pub type LogRankResult = logrank::LogRankResult<f64>;
pub type WeightSpec = logrank::WeightSpec<f64>;
pub type StepFunction = step::StepFunction<f64>;
