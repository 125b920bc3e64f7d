//! Scenario-based risk measures, Choquet integration, consistency checks,
//! rating ladders and pooling analysis for structured-finance ratings.

pub mod casestudy;
pub mod choquet;
pub mod consistency;
pub mod dist;
pub mod error;
pub mod numeric;
pub mod pooling;
pub mod rating;
pub mod rng;

pub use casestudy::{CatBondSpec, LognormalFit, StudyRow};
pub use choquet::{
    choquet_distortion, choquet_oracle, choquet_sdistortion, measure_value, Criterion,
    DistortionFamily, DistortionFunction, FiniteCapacity, SDistortionForm, SDistortionFunction,
    ScenarioMeasure,
};
pub use consistency::{CheckReport, GridSpec, Verdict, Witness};
pub use dist::{DiscreteLoss, OrderMode, ScenarioLoss};
pub use error::{Error, Result};
pub use pooling::{ConditionalFamily, CurvePoint, MixingLaw, PoolMode, PoolModel, SimConfig};
pub use rating::{RatingCriterion, RatingLadder};
