//! Stage 1: stochastic reconstruction.
//!
//! The conditioned depth posterior is an image-guided GMRF whose likelihood
//! is robustly reweighted, so unreliable observations lose precision and
//! fall back on the prior. Drawing an ensemble of exact posterior samples and
//! reducing it to mean and variance gives both a dense depth estimate and a
//! per-pixel reliability signal.

mod ensemble;
mod model;
mod robust;
mod sampler;
mod solver;

pub use ensemble::{ensemble_stats, EnsembleStats};
pub use model::{build_gmrf, GmrfModel, GmrfParams};
pub use robust::{robust_objective, robust_objective_scaled, robust_reweight, robust_reweight_with, IrlsOptions, IrlsReport};
pub use sampler::{
    posterior_mean_exact, posterior_mean_with, posterior_variance_exact, posterior_variance_with,
    sample_posterior, sample_posterior_with, sample_with_perturbation, Perturbation,
};
pub use solver::{solve_spd, solve_spd_from, Solution, SolverOptions, SpdOperator};

use rayon::prelude::*;

use crate::depth::{BitMask, Grid, RgbImage};
use crate::error::Result;
use crate::rng::derive_seed;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig<T> {
    pub gmrf: GmrfParams<T>,
    pub irls: IrlsOptions<T>,
    pub n_samples: usize,
}

impl<T: Scalar> Default for EstimateConfig<T> {
    fn default() -> Self {
        Self {
            gmrf: GmrfParams::default(),
            irls: IrlsOptions::default(),
            n_samples: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T> {
    pub stats: EnsembleStats<T>,
    /// The reweighted model the ensemble was drawn from.
    pub model: GmrfModel<T>,
}

/// Builds the posterior for normalized conditioning `d_cond` under mask `m`,
/// reweights it, and draws `cfg.n_samples` members with seeds
/// `derive_seed(seed, i)`.
pub fn estimate<T: Scalar>(
    rgb: &RgbImage<T>,
    d_cond: &Grid<T>,
    m: &BitMask,
    cfg: &EstimateConfig<T>,
    seed: u64,
) -> Result<Estimate<T>> {
    let model = build_gmrf(rgb, d_cond, m, &cfg.gmrf)?;
    let (model, _) = robust_reweight_with(&model, &cfg.irls)?;
    let samples = draw_ensemble(&model, cfg.n_samples, seed, &cfg.irls.solver)?;
    Ok(Estimate {
        stats: ensemble_stats(&samples)?,
        model,
    })
}

/// Draws `n` members in parallel; member `i` uses `derive_seed(seed, i)`.
pub fn draw_ensemble<T: Scalar>(
    model: &GmrfModel<T>,
    n: usize,
    seed: u64,
    opts: &SolverOptions<T>,
) -> Result<Vec<Grid<T>>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_posterior_with(model, derive_seed(seed, i), opts))
        .collect()
}
