//! Stage 2: deterministic refinement.
//!
//! The ensemble variance is thresholded into a certainty mask, cleaned by a
//! morphological opening and intersected with the observations to give the
//! reliable seeds. A least-squares scale and shift maps the normalized
//! ensemble mean to scene depth, and masked spatial propagation grows the
//! seeds across the image, guided by color, depth and uncertainty features.

mod fit;
mod guidance;
mod mask;
mod mspn;

pub use fit::{fit_scale_shift, ScaleShiftFit};
pub use guidance::{channel, guidance_features, GuidanceFeatures, GUIDANCE_CHANNELS};
pub use mask::{certainty_mask, morphological_open, reliable_depth};
pub use mspn::{mspn_step, MspnParams, RefineState};

use crate::depth::{denormalize_depth, BitMask, DepthMap, Grid, NormalizationParams, RgbImage};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stochastic::EnsembleStats;

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig<T> {
    /// Certainty threshold ε on `σ̂²` (normalized depth units²).
    pub eps: T,
    pub open_radius: usize,
    /// Number of propagation iterations K.
    pub iterations: usize,
    /// Windows applied in order within each iteration.
    pub windows: Vec<usize>,
    pub bandwidth: T,
    pub gamma_max: T,
    /// Feed `σ̂²` into the guidance features and the blend weights.
    pub use_sigma2: bool,
    pub anchor: bool,
}

impl<T: Scalar> Default for RefineConfig<T> {
    fn default() -> Self {
        let p = MspnParams::<T>::default();
        Self {
            eps: T::lit(0.01),
            open_radius: 1,
            iterations: 6,
            windows: vec![13, 3],
            bandwidth: p.bandwidth,
            gamma_max: p.gamma_max,
            use_sigma2: true,
            anchor: p.anchor,
        }
    }
}

impl<T: Scalar> RefineConfig<T> {
    pub fn mspn_params(&self) -> MspnParams<T> {
        MspnParams {
            bandwidth: self.bandwidth,
            gamma_max: self.gamma_max,
            eps: self.eps,
            use_sigma2: self.use_sigma2,
            anchor: self.anchor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > T::zero()) {
            return Err(Error::InvalidConfig(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.windows.is_empty() || self.windows.iter().any(|&w| w < 3 || w % 2 == 0) {
            return Err(Error::InvalidConfig(format!(
                "windows {:?} must be a non-empty list of odd sizes >= 3",
                self.windows
            )));
        }
        self.mspn_params().validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutput<T> {
    /// Dense refined depth in scene units.
    pub depth: DepthMap<T>,
    /// Pixels reached by propagation; the rest fall back to `D_μ̂`.
    pub mask: BitMask,
    /// Raw certainty mask before opening.
    pub certainty: BitMask,
    /// Seeds `ℳ⁰`: observed, certain after opening.
    pub reliable: BitMask,
    pub fit: ScaleShiftFit<T>,
    /// `a·μ̂ + b` in scene units.
    pub d_mu: Grid<T>,
    /// Newly valid pixels after each step.
    pub filled_per_step: Vec<usize>,
}

/// Refines normalized conditioning `d_cond` (valid where `m`) and returns
/// depth in the scene units given by `norm`.
pub fn refine<T: Scalar>(
    d_cond: &Grid<T>,
    m: &BitMask,
    stats: &EnsembleStats<T>,
    i: &RgbImage<T>,
    norm: &NormalizationParams<T>,
    cfg: &RefineConfig<T>,
) -> Result<RefineOutput<T>> {
    let scene = denormalize_depth(d_cond, m, norm)?;
    refine_scene(&scene, m, stats, i, cfg)
}

/// Seed mask used by the refinement: observed pixels whose certainty
/// survives an opening of the mask in which unobserved pixels count as
/// certain. Isolated sparse samples therefore stay seeds, while thin
/// certain slivers inside uncertain observed regions are removed.
pub fn seed_mask<T: Scalar>(
    sigma2_hat: &Grid<T>,
    m: &BitMask,
    eps: T,
    open_radius: usize,
) -> Result<(BitMask, BitMask)> {
    let certain = certainty_mask(sigma2_hat, eps);
    let neutral = certain.or(&m.not())?;
    Ok((certain, morphological_open(&neutral, open_radius)))
}

/// Stage 2 on conditioning already in scene units.
pub fn refine_scene<T: Scalar>(
    d_cond: &DepthMap<T>,
    m: &BitMask,
    stats: &EnsembleStats<T>,
    i: &RgbImage<T>,
    cfg: &RefineConfig<T>,
) -> Result<RefineOutput<T>> {
    cfg.validate()?;
    let dims = d_cond.dims();
    m.check_dims(dims)?;
    stats.mu_hat.check_dims(dims)?;
    stats.sigma2_hat.check_dims(dims)?;
    i.grid().check_dims(dims)?;
    let observed = m.and(&d_cond.grid().map(|v| v > T::zero()))?;

    let (certainty, m_sigma) = seed_mask(&stats.sigma2_hat, &observed, cfg.eps, cfg.open_radius)?;
    let (d_rel, reliable) = reliable_depth(d_cond, &observed, &m_sigma)?;
    let fit = fit_scale_shift(&d_rel, &stats.mu_hat, &reliable)?;
    let d_mu = fit.apply_grid(&stats.mu_hat);

    let mut g = guidance_features(i, &d_rel, &stats.mu_hat, &stats.sigma2_hat)?;
    if !cfg.use_sigma2 {
        g = g.without_uncertainty();
    }
    let params = cfg.mspn_params();
    let mut state = RefineState::new(d_rel.grid().clone(), reliable.clone())?;
    let mut filled_per_step = Vec::with_capacity(cfg.iterations * cfg.windows.len());
    for _ in 0..cfg.iterations {
        for &win in &cfg.windows {
            let before = state.mask.count_ones();
            state = mspn_step(&state, &g, win, &d_mu, &stats.sigma2_hat, &params)?;
            filled_per_step.push(state.mask.count_ones() - before);
        }
    }

    // anchored propagation can overshoot below zero near the camera
    let floor = d_rel
        .values()
        .iter()
        .copied()
        .filter(|&v| v > T::zero())
        .fold(T::infinity(), T::min)
        * T::lit(1e-3);
    let dense = state.depth.zip_map(&state.mask, |v, _| v)?;
    let dense = Grid::from_fn(dims.0, dims.1, |r, c| {
        let v = if state.mask.get(r, c) {
            dense.get(r, c)
        } else {
            d_mu.get(r, c)
        };
        v.max(floor)
    });
    Ok(RefineOutput {
        depth: DepthMap::new(dense)?,
        mask: state.mask,
        certainty,
        reliable,
        fit,
        d_mu,
        filled_per_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mu: Grid<f64>, s2: Grid<f64>) -> EnsembleStats<f64> {
        EnsembleStats {
            mu_hat: mu,
            sigma2_hat: s2,
            n_samples: 10,
        }
    }

    #[test]
    fn clean_dense_input_is_unchanged() {
        let (h, w) = (6, 8);
        let d = DepthMap::new(Grid::from_fn(h, w, |r, c| 1.0 + r as f64 * 0.5 + c as f64 * 0.1)).unwrap();
        let mu = Grid::from_fn(h, w, |r, c| (r * w + c) as f64 / 47.0);
        let st = stats(mu, Grid::filled(h, w, 0.0));
        let rgb = RgbImage::uniform(h, w, [0.3, 0.3, 0.3]).unwrap();
        let cfg = RefineConfig {
            gamma_max: 0.0,
            ..RefineConfig::default()
        };
        let out = refine_scene(&d, &Grid::filled(h, w, true), &st, &rgb, &cfg).unwrap();
        assert_eq!(out.depth, d);
        assert!(out.filled_per_step.iter().all(|&n| n == 0));
    }

    #[test]
    fn sparse_seeds_fill_whole_grid() {
        let (h, w) = (20, 20);
        let truth = |r: usize, c: usize| 2.0 + 0.05 * r as f64 + 0.02 * c as f64;
        let m = Grid::from_fn(h, w, |r, c| r % 5 == 0 && c % 4 == 0);
        let d = DepthMap::new(Grid::from_fn(h, w, |r, c| if m.get(r, c) { truth(r, c) } else { 0.0 }))
            .unwrap();
        let mu = Grid::from_fn(h, w, |r, c| (truth(r, c) - 3.0) / 2.0);
        let s2 = Grid::from_fn(h, w, |r, c| if m.get(r, c) { 0.001 } else { 0.5 });
        let rgb = RgbImage::uniform(h, w, [0.5, 0.5, 0.5]).unwrap();
        let cfg = RefineConfig {
            anchor: true,
            ..RefineConfig::default()
        };
        let out = refine_scene(&d, &m, &stats(mu, s2), &rgb, &cfg).unwrap();
        assert_eq!(out.reliable, m);
        assert_eq!(out.mask.count_ones(), h * w);
        assert!((out.fit.a - 2.0).abs() < 1e-12 && (out.fit.b - 3.0).abs() < 1e-12);
        for r in 0..h {
            for c in 0..w {
                assert!((out.depth.get(r, c) - truth(r, c)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn uncertain_observation_is_not_a_seed() {
        let (h, w) = (9, 9);
        let m = Grid::from_fn(h, w, |r, c| (r + c) % 3 == 0);
        let d = DepthMap::new(Grid::from_fn(h, w, |r, c| if m.get(r, c) { 2.0 } else { 0.0 })).unwrap();
        let mut s2 = Grid::from_fn(h, w, |r, c| if m.get(r, c) { 0.0 } else { 1.0 });
        s2.set(4, 5, 0.5);
        let mu = Grid::from_fn(h, w, |r, _| r as f64 * 0.1);
        let rgb = RgbImage::uniform(h, w, [0.5, 0.5, 0.5]).unwrap();
        let out = refine_scene(&d, &m, &stats(mu, s2), &rgb, &RefineConfig::default()).unwrap();
        assert!(m.get(4, 5) && !out.reliable.get(4, 5));
        assert_eq!(out.reliable.count_ones(), m.count_ones() - 1);
    }

    #[test]
    fn all_uncertain_is_an_error() {
        let d = DepthMap::new(Grid::filled(4, 4, 1.0)).unwrap();
        let st = stats(Grid::filled(4, 4, 0.0), Grid::filled(4, 4, 1.0));
        let rgb = RgbImage::uniform(4, 4, [0.0; 3]).unwrap();
        let r = refine_scene(&d, &Grid::filled(4, 4, true), &st, &rgb, &RefineConfig::default());
        assert!(matches!(r, Err(Error::EmptyReliableSet)));
    }
}
