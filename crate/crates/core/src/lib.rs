//! Two-stage depth enhancement: a robust image-guided GMRF ensemble that
//! estimates depth and its variance, then variance-gated masked propagation
//! that refines the observed depth.

pub mod config;
pub mod depth;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod refine;
pub mod rng;
pub mod run;
pub mod scalar;
pub mod stochastic;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

/// Single-precision instantiations.
pub mod f32 {
    pub type DepthMap = crate::depth::DepthMap<f32>;
    pub type Grid = crate::depth::Grid<f32>;
    pub type RgbImage = crate::depth::RgbImage<f32>;
    pub type GmrfModel = crate::stochastic::GmrfModel<f32>;
    pub type GmrfParams = crate::stochastic::GmrfParams<f32>;
    pub type EnsembleStats = crate::stochastic::EnsembleStats<f32>;
    pub type PipelineConfig = crate::pipeline::PipelineConfig<f32>;
    pub type EvalReport = crate::metrics::EvalReport<f32>;
}

/// Double-precision instantiations.
pub mod f64 {
    pub type DepthMap = crate::depth::DepthMap<f64>;
    pub type Grid = crate::depth::Grid<f64>;
    pub type RgbImage = crate::depth::RgbImage<f64>;
    pub type GmrfModel = crate::stochastic::GmrfModel<f64>;
    pub type GmrfParams = crate::stochastic::GmrfParams<f64>;
    pub type EnsembleStats = crate::stochastic::EnsembleStats<f64>;
    pub type PipelineConfig = crate::pipeline::PipelineConfig<f64>;
    pub type EvalReport = crate::metrics::EvalReport<f64>;
}
