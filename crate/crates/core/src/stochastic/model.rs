//! Image-guided Gaussian Markov random field over a depth grid.
//!
//! The posterior precision is `Q = L(w) + diag(o)`, where `L(w)` is the graph
//! Laplacian of the 4-neighbor grid with color-dependent edge weights
//! `w_pq = λ·exp(−β‖I_p − I_q‖²)` (the image-conditioned prior) and
//! `o_p = τ·m_p·ρ_p` is the observation precision of a conditioned pixel,
//! scaled by its robust weight `ρ_p ∈ (0, 1]` (the likelihood).

use crate::depth::{BitMask, Grid, RgbImage};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::solver::SpdOperator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmrfParams<T> {
    /// Prior smoothness strength λ.
    pub lambda: T,
    /// Color sensitivity β of the edge weights.
    pub beta: T,
    /// Observation precision τ (normalized depth units⁻²).
    pub tau: T,
    /// Student-t degrees of freedom ν of the robust weights.
    pub nu: T,
    /// Residual scale `s` of the robust weights; estimated from the data by
    /// the median absolute residual when `None`.
    pub robust_scale: Option<T>,
    /// Lower bound on the estimated residual scale (normalized depth units).
    pub min_robust_scale: T,
    /// Floor applied to every edge weight, as a fraction of λ.
    pub edge_floor: T,
}

impl<T: Scalar> Default for GmrfParams<T> {
    fn default() -> Self {
        Self {
            lambda: T::one(),
            beta: T::lit(200.0),
            tau: T::lit(800.0),
            nu: T::lit(20.0),
            robust_scale: None,
            min_robust_scale: T::lit(0.02),
            edge_floor: T::zero(),
        }
    }
}

impl<T: Scalar> GmrfParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda >= T::zero()
            && self.beta >= T::zero()
            && self.tau > T::zero()
            && self.nu > T::zero()
            && self.min_robust_scale > T::zero()
            && self.edge_floor >= T::zero()
            && self.robust_scale.is_none_or(|s| s > T::zero());
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid GMRF parameters {self:?}")));
        }
        Ok(())
    }

    fn edge_weight(&self, dist2: T) -> T {
        let w = self.lambda * (-self.beta * dist2).exp();
        w.max(self.edge_floor * self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmrfModel<T> {
    height: usize,
    width: usize,
    /// Weight of edge (r, c)–(r, c+1), indexed `r * (width - 1) + c`.
    horizontal: Vec<T>,
    /// Weight of edge (r, c)–(r+1, c), indexed `r * width + c`.
    vertical: Vec<T>,
    cond_mask: BitMask,
    robust_weights: Vec<T>,
    obs_values: Grid<T>,
    params: GmrfParams<T>,
    /// Residual scale used by the last robust reweighting pass.
    pub(crate) robust_scale_used: Option<T>,
}

/// Assembles the posterior for conditioned normalized depth `d_cond` under
/// conditioning mask `m` and guide image `rgb`. Robust weights start at 1.
pub fn build_gmrf<T: Scalar>(
    rgb: &RgbImage<T>,
    d_cond: &Grid<T>,
    m: &BitMask,
    params: &GmrfParams<T>,
) -> Result<GmrfModel<T>> {
    params.validate()?;
    let dims = d_cond.dims();
    rgb.grid().check_dims(dims)?;
    m.check_dims(dims)?;
    if m.count_ones() == 0 {
        return Err(Error::EmptyConditioning);
    }
    let (h, w) = dims;
    let mut horizontal = Vec::with_capacity(h * w.saturating_sub(1));
    for r in 0..h {
        for c in 0..w.saturating_sub(1) {
            let i = r * w + c;
            horizontal.push(params.edge_weight(rgb.color_dist2(i, i + 1)));
        }
    }
    let mut vertical = Vec::with_capacity(h.saturating_sub(1) * w);
    for r in 0..h.saturating_sub(1) {
        for c in 0..w {
            let i = r * w + c;
            vertical.push(params.edge_weight(rgb.color_dist2(i, i + w)));
        }
    }
    Ok(GmrfModel {
        height: h,
        width: w,
        horizontal,
        vertical,
        cond_mask: m.clone(),
        robust_weights: vec![T::one(); h * w],
        obs_values: d_cond.zip_map(m, |v, keep| if keep { v } else { T::zero() })?,
        params: *params,
        robust_scale_used: None,
    })
}

impl<T: Scalar> GmrfModel<T> {
    /// Builds a model from explicit edge weights, for tests and tooling.
    pub fn from_parts(
        dims: (usize, usize),
        horizontal: Vec<T>,
        vertical: Vec<T>,
        cond_mask: BitMask,
        robust_weights: Vec<T>,
        obs_values: Grid<T>,
        params: GmrfParams<T>,
    ) -> Result<Self> {
        params.validate()?;
        let (h, w) = dims;
        cond_mask.check_dims(dims)?;
        obs_values.check_dims(dims)?;
        if horizontal.len() != h * w.saturating_sub(1)
            || vertical.len() != h.saturating_sub(1) * w
            || robust_weights.len() != h * w
        {
            return Err(Error::InvalidConfig("edge or weight arrays have wrong length".into()));
        }
        if horizontal.iter().chain(&vertical).any(|&x| !(x >= T::zero())) {
            return Err(Error::InvalidConfig("edge weights must be >= 0".into()));
        }
        if robust_weights.iter().any(|&x| !(x > T::zero() && x <= T::one())) {
            return Err(Error::InvalidConfig("robust weights must lie in (0, 1]".into()));
        }
        if cond_mask.count_ones() == 0 {
            return Err(Error::EmptyConditioning);
        }
        Ok(Self {
            height: h,
            width: w,
            horizontal,
            vertical,
            cond_mask,
            robust_weights,
            obs_values,
            params,
            robust_scale_used: None,
        })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn params(&self) -> &GmrfParams<T> {
        &self.params
    }

    pub fn horizontal_weights(&self) -> &[T] {
        &self.horizontal
    }

    pub fn vertical_weights(&self) -> &[T] {
        &self.vertical
    }

    pub fn conditioning_mask(&self) -> &BitMask {
        &self.cond_mask
    }

    pub fn obs_values(&self) -> &Grid<T> {
        &self.obs_values
    }

    pub fn robust_weights(&self) -> &[T] {
        &self.robust_weights
    }

    pub fn robust_scale_used(&self) -> Option<T> {
        self.robust_scale_used
    }

    pub(crate) fn set_robust_weights(&mut self, weights: Vec<T>) {
        debug_assert_eq!(weights.len(), self.len());
        self.robust_weights = weights;
    }

    /// `o_p = τ·m_p·ρ_p`
    #[inline]
    pub fn obs_precision(&self, i: usize) -> T {
        if self.cond_mask.data()[i] {
            self.params.tau * self.robust_weights[i]
        } else {
            T::zero()
        }
    }

    pub fn obs_precisions(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.obs_precision(i)).collect()
    }

    /// Right-hand side `diag(o)·d` of the posterior mean system.
    pub fn mean_rhs(&self) -> Vec<T> {
        (0..self.len())
            .map(|i| self.obs_precision(i) * self.obs_values.data()[i])
            .collect()
    }

    /// Visits every edge as `(i, j, w_ij)` with `i < j`: horizontal edges
    /// first, then vertical.
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, usize, T)) {
        let (h, w) = self.dims();
        if w > 1 {
            for r in 0..h {
                for c in 0..w - 1 {
                    let i = r * w + c;
                    f(i, i + 1, self.horizontal[r * (w - 1) + c]);
                }
            }
        }
        for r in 0..h.saturating_sub(1) {
            for c in 0..w {
                let i = r * w + c;
                f(i, i + w, self.vertical[i]);
            }
        }
    }

    pub fn edge_count(&self) -> usize {
        self.horizontal.len() + self.vertical.len()
    }

    /// Dense row-major copy of `Q`, for small-grid verification.
    pub fn dense_precision(&self) -> Vec<T> {
        let n = self.len();
        let mut q = vec![T::zero(); n * n];
        for i in 0..n {
            q[i * n + i] = self.obs_precision(i);
        }
        self.for_each_edge(|i, j, w| {
            q[i * n + i] = q[i * n + i] + w;
            q[j * n + j] = q[j * n + j] + w;
            q[i * n + j] = q[i * n + j] - w;
            q[j * n + i] = q[j * n + i] - w;
        });
        q
    }
}

impl<T: Scalar> SpdOperator<T> for GmrfModel<T> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.obs_precision(i) * x[i];
        }
        self.for_each_edge(|i, j, w| {
            let d = w * (x[i] - x[j]);
            y[i] = y[i] + d;
            y[j] = y[j] - d;
        });
    }

    fn diagonal(&self) -> Vec<T> {
        let mut d = self.obs_precisions();
        self.for_each_edge(|i, j, w| {
            d[i] = d[i] + w;
            d[j] = d[j] + w;
        });
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_rgb(h: usize, w: usize) -> RgbImage<f64> {
        RgbImage::uniform(h, w, [0.3, 0.5, 0.7]).unwrap()
    }

    #[test]
    fn uniform_image_gives_lambda_weights() {
        let params = GmrfParams {
            lambda: 2.5,
            ..GmrfParams::default()
        };
        let d = Grid::filled(4, 5, 0.0);
        let m = Grid::filled(4, 5, true);
        let model = build_gmrf(&uniform_rgb(4, 5), &d, &m, &params).unwrap();
        assert!(model
            .horizontal_weights()
            .iter()
            .chain(model.vertical_weights())
            .all(|&w| w == 2.5));
        assert_eq!(model.edge_count(), 4 * 4 + 3 * 5);
    }

    #[test]
    fn large_beta_cuts_contrast_edges() {
        let rgb = RgbImage::new(
            Grid::from_vec(1, 2, vec![[0.0, 0.0, 0.0], [0.2, 0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let d = Grid::filled(1, 2, 0.0);
        let m = Grid::filled(1, 2, true);
        for beta in [1e2f64, 1e4, 1e6] {
            let params = GmrfParams {
                beta,
                ..GmrfParams::default()
            };
            let model = build_gmrf(&rgb, &d, &m, &params).unwrap();
            assert!(model.horizontal_weights()[0] <= (-beta * 0.04).exp());
        }
    }

    #[test]
    fn full_mask_gives_tau_everywhere() {
        let d = Grid::filled(3, 3, 0.5);
        let m = Grid::filled(3, 3, true);
        let model = build_gmrf(&uniform_rgb(3, 3), &d, &m, &GmrfParams::default()).unwrap();
        assert!(model.obs_precisions().iter().all(|&o| o == 800.0));
        assert!(model.robust_weights().iter().all(|&r| r == 1.0));
    }

    #[test]
    fn empty_conditioning_rejected() {
        let d = Grid::filled(3, 3, 0.5);
        let m = Grid::filled(3, 3, false);
        assert!(matches!(
            build_gmrf(&uniform_rgb(3, 3), &d, &m, &GmrfParams::default()),
            Err(Error::EmptyConditioning)
        ));
        let m = Grid::filled(2, 3, true);
        assert!(build_gmrf(&uniform_rgb(3, 3), &d, &m, &GmrfParams::default()).is_err());
    }

    #[test]
    fn operator_matches_dense_matrix() {
        let rgb = RgbImage::new(Grid::from_fn(3, 4, |r, c| {
            [r as f64 / 3.0, c as f64 / 4.0, 0.5]
        }))
        .unwrap();
        let d = Grid::from_fn(3, 4, |r, c| (r as f64 - c as f64) / 4.0);
        let m = Grid::from_fn(3, 4, |r, c| (r + c) % 2 == 0);
        let model = build_gmrf(&rgb, &d, &m, &GmrfParams::default()).unwrap();
        let q = model.dense_precision();
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; 12];
        model.apply(&x, &mut y);
        for i in 0..12 {
            let dense: f64 = (0..12).map(|j| q[i * 12 + j] * x[j]).sum();
            assert!((dense - y[i]).abs() < 1e-12);
            assert!((q[i * 12 + i] - model.diagonal()[i]).abs() < 1e-12);
        }
    }
}
