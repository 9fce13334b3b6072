//! Iteratively reweighted robust likelihood.
//!
//! Observations are scored with a Student-t penalty
//! `τ·ν·s²·log(1 + r²/(ν·s²))` on the residual `r = x_p − d_p`. Each pass
//! solves for the posterior mean under the current weights and refreshes
//! `ρ_p = ν / (ν + r_p²/s_p²)`; this is a majorize-minimize scheme, so the
//! robust objective never increases.
//!
//! With leverage standardization the per-pixel scale is
//! `s_p = s·(1 − h_p)`, where `h_p = τ·(Q⁻¹)_pp` is the leverage of the
//! observation under unit weights. Then `r_p/(1 − h_p)` is the leave-one-out
//! prediction error `d_p − μ₋ₚ(p)`, which is comparable across pixels no
//! matter how strongly each one is tied to its neighbors.

use crate::error::Result;
use crate::scalar::Scalar;

use super::model::GmrfModel;
use rayon::prelude::*;

use super::sampler::{posterior_mean_with, posterior_variance_with};
use super::solver::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions<T> {
    pub max_iters: usize,
    /// Stop once the largest weight change falls below this.
    pub tol: T,
    /// Scale residuals by observation leverage (one variance solve per
    /// conditioned pixel).
    pub leverage: bool,
    pub solver: SolverOptions<T>,
}

impl<T: Scalar> Default for IrlsOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 10,
            tol: T::lit(1e-4),
            leverage: true,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsReport<T> {
    pub iterations: usize,
    pub scale: T,
    /// Robust objective at the mean after each solve, starting with the
    /// initial weights.
    pub objective: Vec<T>,
}

/// Median-absolute-residual scale, `1.4826·median|r|`.
fn mad_scale<T: Scalar>(residuals: &mut [T]) -> T {
    if residuals.is_empty() {
        return T::zero();
    }
    for r in residuals.iter_mut() {
        *r = r.abs();
    }
    residuals.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
    let n = residuals.len();
    let med = if n % 2 == 1 {
        residuals[n / 2]
    } else {
        (residuals[n / 2 - 1] + residuals[n / 2]) / T::lit(2.0)
    };
    T::lit(1.4826) * med
}

/// Robust objective of a candidate field `x` under residual scale `s`.
pub fn robust_objective<T: Scalar>(model: &GmrfModel<T>, x: &[T], scale: T) -> T {
    robust_objective_scaled(model, x, &vec![scale; model.len()])
}

/// Robust objective with a per-pixel residual scale.
pub fn robust_objective_scaled<T: Scalar>(model: &GmrfModel<T>, x: &[T], scales: &[T]) -> T {
    let p = model.params();
    let mut total = T::zero();
    model.for_each_edge(|i, j, w| {
        let d = x[i] - x[j];
        total = total + w * d * d;
    });
    let mask = model.conditioning_mask().data();
    let obs = model.obs_values().data();
    for i in 0..model.len() {
        if mask[i] {
            let r = x[i] - obs[i];
            let nu_s2 = p.nu * scales[i] * scales[i];
            total = total + p.tau * nu_s2 * (T::one() + r * r / nu_s2).ln();
        }
    }
    total
}

/// `1 − τ·ρ_p·(Q⁻¹)_pp` at conditioned pixels, `1` elsewhere.
fn leverage_shrink<T: Scalar>(model: &GmrfModel<T>, opts: &SolverOptions<T>) -> Result<Vec<T>> {
    let pixels = model.conditioning_mask().ones();
    let var: Vec<T> = pixels
        .par_iter()
        .map(|&p| posterior_variance_with(model, &[p], opts).map(|v| v[0]))
        .collect::<Result<_>>()?;
    let mut out = vec![T::one(); model.len()];
    let floor = T::lit(1e-6);
    for (&p, v) in pixels.iter().zip(var) {
        out[p] = (T::one() - model.obs_precision(p) * v).max(floor);
    }
    Ok(out)
}

fn residuals<T: Scalar>(model: &GmrfModel<T>, mean: &[T]) -> Vec<(usize, T)> {
    let mask = model.conditioning_mask().data();
    let obs = model.obs_values().data();
    (0..model.len())
        .filter(|&i| mask[i])
        .map(|i| (i, mean[i] - obs[i]))
        .collect()
}

/// Runs at most `max_iters` reweighting passes; `max_iters == 0` returns the
/// model unchanged.
pub fn robust_reweight<T: Scalar>(
    model: &GmrfModel<T>,
    max_iters: usize,
    tol: T,
) -> Result<GmrfModel<T>> {
    let opts = IrlsOptions {
        max_iters,
        tol,
        ..IrlsOptions::default()
    };
    robust_reweight_with(model, &opts).map(|(m, _)| m)
}

pub fn robust_reweight_with<T: Scalar>(
    model: &GmrfModel<T>,
    opts: &IrlsOptions<T>,
) -> Result<(GmrfModel<T>, IrlsReport<T>)> {
    let mut out = model.clone();
    let params = *model.params();
    if opts.max_iters == 0 {
        let scale = params.robust_scale.unwrap_or(params.min_robust_scale);
        return Ok((
            out,
            IrlsReport {
                iterations: 0,
                scale,
                objective: Vec::new(),
            },
        ));
    }
    let mut mean = posterior_mean_with(&out, &opts.solver)?;
    // (1 − h_p) per pixel; 1 where unused
    let shrink = if opts.leverage {
        leverage_shrink(&out, &opts.solver)?
    } else {
        vec![T::one(); out.len()]
    };
    let scale = match params.robust_scale {
        Some(s) => s,
        None => {
            let mut r: Vec<T> = residuals(&out, mean.data())
                .into_iter()
                .map(|(i, r)| r / shrink[i])
                .collect();
            mad_scale(&mut r).max(params.min_robust_scale)
        }
    };
    let scales: Vec<T> = shrink.iter().map(|&f| f * scale).collect();
    let mut objective = vec![robust_objective_scaled(&out, mean.data(), &scales)];
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let mut weights = out.robust_weights().to_vec();
        let mut max_change = T::zero();
        for (i, r) in residuals(&out, mean.data()) {
            let z = r / scales[i];
            let rho = (params.nu / (params.nu + z * z)).min(T::one());
            // ρ stays strictly positive so Q keeps its conditioning mask
            let rho = rho.max(T::min_positive_value());
            max_change = max_change.max((rho - weights[i]).abs());
            weights[i] = rho;
        }
        out.set_robust_weights(weights);
        iterations += 1;
        mean = posterior_mean_with(&out, &opts.solver)?;
        objective.push(robust_objective_scaled(&out, mean.data(), &scales));
        if max_change < opts.tol {
            break;
        }
    }
    out.robust_scale_used = Some(scale);
    Ok((
        out,
        IrlsReport {
            iterations,
            scale,
            objective,
        },
    ))
}
