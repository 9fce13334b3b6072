//! End-to-end enhancement: normalize, estimate, refine; plus the reference
//! reconstructions the pipeline is compared against.

use crate::depth::{
    normalize_depth, normalize_depth_quantile, valid_mask, BitMask, DepthMap, Grid,
    NormalizationParams, NormalizedDepth, RgbImage,
};
use crate::error::Result;
use crate::refine::{fit_scale_shift, refine, seed_mask, RefineConfig, RefineOutput, ScaleShiftFit};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::stochastic::{
    build_gmrf, estimate, posterior_mean_with, EnsembleStats, EstimateConfig, GmrfModel,
    GmrfParams,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T> {
    pub estimate: EstimateConfig<T>,
    pub refine: RefineConfig<T>,
    /// Normalize with these low/high quantiles instead of min/max.
    pub quantiles: Option<(f64, f64)>,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            estimate: EstimateConfig::default(),
            refine: RefineConfig::default(),
            quantiles: None,
        }
    }
}

impl<T: Scalar> PipelineConfig<T> {
    /// The same machinery with every observation trusted: no robust
    /// reweighting and no certainty masking.
    pub fn raw_completion(&self) -> Self {
        let mut cfg = self.clone();
        cfg.estimate.irls.max_iters = 0;
        cfg.refine.eps = T::infinity();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.estimate.gmrf.validate()?;
        self.refine.validate()?;
        if self.estimate.n_samples == 0 {
            return Err(crate::Error::InvalidConfig("n_samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput<T> {
    pub norm: NormalizationParams<T>,
    pub normalized: NormalizedDepth<T>,
    pub stats: EnsembleStats<T>,
    pub model: GmrfModel<T>,
    pub refined: RefineOutput<T>,
}

pub fn normalize<T: Scalar>(
    depth: &DepthMap<T>,
    quantiles: Option<(f64, f64)>,
) -> Result<(NormalizedDepth<T>, NormalizationParams<T>)> {
    match quantiles {
        Some((lo, hi)) => normalize_depth_quantile(depth, lo, hi),
        None => normalize_depth(depth),
    }
}

/// Runs both stages on scene-unit conditioning `depth` (zeros missing).
pub fn run_pipeline<T: Scalar>(
    rgb: &RgbImage<T>,
    depth: &DepthMap<T>,
    cfg: &PipelineConfig<T>,
    seed: u64,
) -> Result<PipelineOutput<T>> {
    cfg.validate()?;
    let (normalized, norm) = normalize(depth, cfg.quantiles)?;
    let est = estimate(rgb, &normalized.values, &normalized.mask, &cfg.estimate, seed)?;
    let refined = refine(
        &normalized.values,
        &normalized.mask,
        &est.stats,
        rgb,
        &norm,
        &cfg.refine,
    )?;
    Ok(PipelineOutput {
        norm,
        normalized,
        stats: est.stats,
        model: est.model,
        refined,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffOnly<T> {
    pub depth: DepthMap<T>,
    pub fit: ScaleShiftFit<T>,
}

/// Stage 1 alone: the posterior is re-estimated from the reliable pixels
/// only, rescaled onto them by least squares, and used to fill every other
/// pixel.
pub fn diff_only<T: Scalar>(
    rgb: &RgbImage<T>,
    depth: &DepthMap<T>,
    out: &PipelineOutput<T>,
    cfg: &PipelineConfig<T>,
    seed: u64,
) -> Result<DiffOnly<T>> {
    diff_only_on(rgb, depth, &out.normalized, &out.refined.reliable, cfg, seed)
}

/// [`diff_only`] from a first-stage result, without running propagation:
/// the reliable mask is derived from `stats` exactly as the refinement does.
pub fn diff_only_from_stats<T: Scalar>(
    rgb: &RgbImage<T>,
    depth: &DepthMap<T>,
    normalized: &NormalizedDepth<T>,
    stats: &EnsembleStats<T>,
    cfg: &PipelineConfig<T>,
    seed: u64,
) -> Result<DiffOnly<T>> {
    let observed = normalized.mask.and(&valid_mask(depth))?;
    let (_, opened) = seed_mask(&stats.sigma2_hat, &observed, cfg.refine.eps, cfg.refine.open_radius)?;
    let reliable = observed.and(&opened)?;
    if reliable.count_ones() == 0 {
        return Err(crate::Error::EmptyReliableSet);
    }
    diff_only_on(rgb, depth, normalized, &reliable, cfg, seed)
}

fn diff_only_on<T: Scalar>(
    rgb: &RgbImage<T>,
    depth: &DepthMap<T>,
    normalized: &NormalizedDepth<T>,
    reliable: &BitMask,
    cfg: &PipelineConfig<T>,
    seed: u64,
) -> Result<DiffOnly<T>> {
    let est = estimate(rgb, &normalized.values, reliable, &cfg.estimate, derive_seed(seed, 1))?;
    let d_rel = depth.masked(reliable)?;
    let fit = fit_scale_shift(&d_rel, &est.stats.mu_hat, reliable)?;
    Ok(DiffOnly {
        depth: compose(&d_rel, reliable, &fit.apply_grid(&est.stats.mu_hat)),
        fit,
    })
}

/// `d` where `keep`, `fill` elsewhere, floored just above zero.
fn compose<T: Scalar>(d: &DepthMap<T>, keep: &BitMask, fill: &Grid<T>) -> DepthMap<T> {
    let floor = d
        .values()
        .iter()
        .copied()
        .filter(|&v| v > T::zero())
        .fold(T::infinity(), T::min)
        * T::lit(1e-3);
    let (h, w) = d.dims();
    DepthMap::sanitized(Grid::from_fn(h, w, |r, c| {
        if keep.get(r, c) {
            d.get(r, c)
        } else {
            fill.get(r, c).max(floor)
        }
    }))
}

/// Observation precision of the ground-plane pseudo-observation used by
/// [`prior_only`].
pub const PRIOR_ONLY_TAU: f64 = 1e-2;

/// Reconstruction from the image prior alone. All depth conditioning is
/// removed; a weak image-row ramp (a ground plane seen from a level camera)
/// keeps the posterior proper. Its mean is rescaled onto the visible depth
/// by least squares, and the result is returned on every pixel.
pub fn prior_only<T: Scalar>(
    rgb: &RgbImage<T>,
    depth: &DepthMap<T>,
    gmrf: &GmrfParams<T>,
) -> Result<(DepthMap<T>, ScaleShiftFit<T>)> {
    let (h, w) = depth.dims();
    let denom = T::from_count(h.max(2) - 1);
    let ramp = Grid::from_fn(h, w, |r, _| T::lit(2.0) * T::from_count(r) / denom - T::one());
    let params = GmrfParams {
        tau: T::lit(PRIOR_ONLY_TAU),
        ..*gmrf
    };
    let model = build_gmrf(rgb, &ramp, &Grid::filled(h, w, true), &params)?;
    let mu = posterior_mean_with(&model, &Default::default())?;
    let visible = valid_mask(depth);
    let fit = fit_scale_shift(depth, &mu, &visible)?;
    let none = Grid::filled(h, w, false);
    Ok((compose(depth, &none, &fit.apply_grid(&mu)), fit))
}
