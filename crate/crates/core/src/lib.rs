//! Delay- and energy-optimal packetization intervals for a single-hop ARQ
//! link fed by Poisson symbol arrivals.
//!
//! The analytical side ([`model`], [`energy`], [`optimizer`]) is generic over
//! the floating-point type through [`Scalar`]; the aliases below fix it to
//! `f64` or `f32`. The discrete-event [`sim`]ulator is an independent
//! Monte-Carlo check of the model and always runs in `f64`.

// `!(x > y)` is used on purpose so that NaN inputs fall into the error branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod scalar;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use model::{CodingProfile, DelayBreakdown, Mode, Moments, StabilityReport, SystemParams};
pub use energy::{Binding, EnergyResult};
pub use optimizer::{OptimizationResult, SearchMethod, StableRange};
pub use scalar::Scalar;
pub use sim::{PacketRecord, SimConfig, SimulationResult};

pub type SystemParamsF64 = model::SystemParams<f64>;
pub type SystemParamsF32 = model::SystemParams<f32>;
pub type MomentsF64 = model::Moments<f64>;
pub type MomentsF32 = model::Moments<f32>;
pub type DelayBreakdownF64 = model::DelayBreakdown<f64>;
pub type DelayBreakdownF32 = model::DelayBreakdown<f32>;
pub type OptimizationResultF64 = optimizer::OptimizationResult<f64>;
pub type OptimizationResultF32 = optimizer::OptimizationResult<f32>;
pub type EnergyResultF64 = energy::EnergyResult<f64>;
pub type EnergyResultF32 = energy::EnergyResult<f32>;
