//! Exact posterior moments and perturb-and-MAP sampling.
//!
//! A posterior draw is the minimizer of
//! `Σ w_pq (x_p − x_q − ε_pq)² + Σ o_p (x_p − d_p − ε_p)²` with
//! `ε_pq ~ N(0, 1/w_pq)` and `ε_p ~ N(0, 1/o_p)`. The right-hand side of the
//! resulting system `Q x = b` has covariance `Q`, so `x` has covariance
//! `Q⁻¹` around the posterior mean.

use crate::depth::Grid;
use crate::error::Result;
use crate::rng::{rng_from_seed, standard_normal};
use crate::scalar::Scalar;

use super::model::GmrfModel;
use super::solver::{solve_spd, SolverOptions};

/// Standard-normal perturbations for one draw: one per edge (in
/// [`GmrfModel::for_each_edge`] order) and one per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation<T> {
    pub edges: Vec<T>,
    pub pixels: Vec<T>,
}

impl<T: Scalar> Perturbation<T> {
    pub fn zeros(model: &GmrfModel<T>) -> Self {
        Self {
            edges: vec![T::zero(); model.edge_count()],
            pixels: vec![T::zero(); model.len()],
        }
    }

    pub fn draw(model: &GmrfModel<T>, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let edges = (0..model.edge_count())
            .map(|_| standard_normal(&mut rng))
            .collect();
        let pixels = (0..model.len()).map(|_| standard_normal(&mut rng)).collect();
        Self { edges, pixels }
    }
}

/// Solves the perturbed MAP problem for the given standard-normal draws.
pub fn sample_with_perturbation<T: Scalar>(
    model: &GmrfModel<T>,
    noise: &Perturbation<T>,
    opts: &SolverOptions<T>,
) -> Result<Grid<T>> {
    let mut rhs = model.mean_rhs();
    for (i, b) in rhs.iter_mut().enumerate() {
        *b = *b + model.obs_precision(i).sqrt() * noise.pixels[i];
    }
    let mut k = 0;
    model.for_each_edge(|i, j, w| {
        // w·ε with ε ~ N(0, 1/w) is √w·z
        let f = w.sqrt() * noise.edges[k];
        rhs[i] = rhs[i] + f;
        rhs[j] = rhs[j] - f;
        k += 1;
    });
    let x = solve_spd(model, &rhs, opts)?;
    let (h, w) = model.dims();
    Grid::from_vec(h, w, x)
}

/// One posterior reconstruction, deterministic in `seed`.
pub fn sample_posterior<T: Scalar>(model: &GmrfModel<T>, seed: u64) -> Result<Grid<T>> {
    sample_posterior_with(model, seed, &SolverOptions::default())
}

pub fn sample_posterior_with<T: Scalar>(
    model: &GmrfModel<T>,
    seed: u64,
    opts: &SolverOptions<T>,
) -> Result<Grid<T>> {
    sample_with_perturbation(model, &Perturbation::draw(model, seed), opts)
}

/// Posterior mean (the unperturbed MAP): `Q μ = diag(o)·d`.
pub fn posterior_mean_exact<T: Scalar>(model: &GmrfModel<T>) -> Result<Grid<T>> {
    posterior_mean_with(model, &SolverOptions::default())
}

pub fn posterior_mean_with<T: Scalar>(
    model: &GmrfModel<T>,
    opts: &SolverOptions<T>,
) -> Result<Grid<T>> {
    let x = solve_spd(model, &model.mean_rhs(), opts)?;
    let (h, w) = model.dims();
    Grid::from_vec(h, w, x)
}

/// Marginal posterior variances `eₚᵀ Q⁻¹ eₚ` at the given flat pixel
/// indices, one solve per pixel.
pub fn posterior_variance_exact<T: Scalar>(
    model: &GmrfModel<T>,
    pixels: &[usize],
) -> Result<Vec<T>> {
    posterior_variance_with(model, pixels, &SolverOptions::default())
}

pub fn posterior_variance_with<T: Scalar>(
    model: &GmrfModel<T>,
    pixels: &[usize],
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    let n = model.len();
    let mut e = vec![T::zero(); n];
    pixels
        .iter()
        .map(|&p| {
            e[p] = T::one();
            let x = solve_spd(model, &e, opts);
            e[p] = T::zero();
            x.map(|x| x[p])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::{BitMask, RgbImage};
    use crate::stochastic::model::{build_gmrf, GmrfParams};

    fn chain_model() -> GmrfModel<f64> {
        let rgb = RgbImage::uniform(1, 3, [0.5, 0.5, 0.5]).unwrap();
        let d = Grid::from_vec(1, 3, vec![0.2, 0.0, 0.8]).unwrap();
        let m = Grid::from_vec(1, 3, vec![true, false, true]).unwrap();
        build_gmrf(&rgb, &d, &m, &GmrfParams::default()).unwrap()
    }

    #[test]
    fn chain_middle_is_average_of_ends() {
        let model = chain_model();
        let mean = posterior_mean_exact(&model).unwrap();
        let x = mean.data();
        assert!((x[1] - 0.5 * (x[0] + x[2])).abs() < 1e-10);
        let zero = sample_with_perturbation(
            &model,
            &Perturbation::zeros(&model),
            &SolverOptions::default(),
        )
        .unwrap();
        let z = zero.data();
        assert!((z[1] - 0.5 * (z[0] + z[2])).abs() < 1e-10);
        // symmetric ends: exactly halfway between observations
        assert!((x[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn single_pixel_variance_is_inverse_tau() {
        let rgb = RgbImage::uniform(1, 1, [0.0; 3]).unwrap();
        let d = Grid::filled(1, 1, 0.3f64);
        let m: BitMask = Grid::filled(1, 1, true);
        let params = GmrfParams {
            tau: 40.0,
            ..GmrfParams::default()
        };
        let model = build_gmrf(&rgb, &d, &m, &params).unwrap();
        let v = posterior_variance_exact(&model, &[0]).unwrap();
        assert!((v[0] - 1.0 / 40.0).abs() < 1e-15);
        assert!((posterior_mean_exact(&model).unwrap().data()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn likelihood_dominated_limit() {
        let (h, w) = (6, 6);
        let rgb = RgbImage::new(Grid::from_fn(h, w, |r, c| {
            [(r * c) as f64 / 25.0, 0.5, c as f64 / 5.0]
        }))
        .unwrap();
        let d = Grid::from_fn(h, w, |r, c| ((r as f64) - (c as f64) * 0.5) / 6.0);
        let m = Grid::filled(h, w, true);
        let params = GmrfParams {
            tau: 1e8,
            ..GmrfParams::default()
        };
        let model = build_gmrf(&rgb, &d, &m, &params).unwrap();
        let s = sample_posterior(&model, 17).unwrap();
        let dev = s
            .data()
            .iter()
            .zip(d.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-3, "deviation {dev}");
        let mean = posterior_mean_exact(&model).unwrap();
        for (a, b) in mean.data().iter().zip(d.data()) {
            assert!((a - b).abs() < 1e-6);
        }
        let var = posterior_variance_exact(&model, &[0, 7, 35]).unwrap();
        assert!(var.iter().all(|&v| v < 1e-6 && v > 0.0));
    }

    #[test]
    fn identity_precision_returns_rhs() {
        let rgb = RgbImage::uniform(3, 3, [0.1, 0.2, 0.3]).unwrap();
        let d = Grid::from_fn(3, 3, |r, c| r as f64 - c as f64);
        let m = Grid::filled(3, 3, true);
        let params = GmrfParams {
            lambda: 0.0,
            tau: 1.0,
            ..GmrfParams::default()
        };
        let model = build_gmrf(&rgb, &d, &m, &params).unwrap();
        let b: Vec<f64> = (0..9).map(|i| i as f64 * 0.5 - 1.0).collect();
        let x = solve_spd(&model, &b, &SolverOptions::default()).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let model = chain_model();
        assert_eq!(
            sample_posterior(&model, 5).unwrap(),
            sample_posterior(&model, 5).unwrap()
        );
        assert_ne!(
            sample_posterior(&model, 5).unwrap(),
            sample_posterior(&model, 6).unwrap()
        );
    }
}
