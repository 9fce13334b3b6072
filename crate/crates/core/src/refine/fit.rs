use crate::depth::{BitMask, DepthMap, Grid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Least-squares affine map `d ≈ a·μ̂ + b` from normalized ensemble mean to
/// scene depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleShiftFit<T> {
    pub a: T,
    pub b: T,
    pub residual_rms: T,
    pub support_count: usize,
}

impl<T: Scalar> ScaleShiftFit<T> {
    pub fn apply(&self, mu: T) -> T {
        self.a * mu + self.b
    }

    /// `D_μ̂ = a·μ̂ + b` over the whole grid.
    pub fn apply_grid(&self, mu_hat: &Grid<T>) -> Grid<T> {
        mu_hat.map(|m| self.apply(m))
    }
}

/// Closed-form minimizer of `Σ (d_rel − (a·μ̂ + b))²` over the support
/// pixels that also carry a valid depth.
pub fn fit_scale_shift<T: Scalar>(
    d_rel: &DepthMap<T>,
    mu_hat: &Grid<T>,
    support: &BitMask,
) -> Result<ScaleShiftFit<T>> {
    let dims = d_rel.dims();
    mu_hat.check_dims(dims)?;
    support.check_dims(dims)?;
    let pairs: Vec<(T, T)> = (0..d_rel.values().len())
        .filter(|&i| support.data()[i] && d_rel.values()[i] > T::zero())
        .map(|i| (mu_hat.data()[i], d_rel.values()[i]))
        .collect();
    let n = pairs.len();
    if n < 2 {
        return Err(Error::SingularFit(format!(
            "{n} support pixels, need at least 2"
        )));
    }
    let nt = T::from_count(n);
    let (sx, sy) = pairs
        .iter()
        .fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / nt, sy / nt);
    let (mut sxx, mut sxy, mut xx) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in &pairs {
        let dx = x - mx;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * (y - my);
        xx = xx + x * x;
    }
    if !(sxx > T::epsilon() * xx) {
        return Err(Error::SingularFit("mu_hat is constant on the support".into()));
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let sse = pairs.iter().fold(T::zero(), |acc, &(x, y)| {
        let r = y - (a * x + b);
        acc + r * r
    });
    Ok(ScaleShiftFit {
        a,
        b,
        residual_rms: (sse / nt).sqrt(),
        support_count: n,
    })
}
