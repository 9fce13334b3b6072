use rayon::prelude::*;

use crate::depth::{BitMask, Grid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::guidance::GuidanceFeatures;

/// Depth and validity mask during masked propagation. Depth is in scene
/// units and meaningful only where `mask` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineState<T> {
    pub depth: Grid<T>,
    pub mask: BitMask,
    pub iteration: usize,
}

impl<T: Scalar> RefineState<T> {
    pub fn new(depth: Grid<T>, mask: BitMask) -> Result<Self> {
        mask.check_dims(depth.dims())?;
        Ok(Self {
            depth,
            mask,
            iteration: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MspnParams<T> {
    /// Affinity bandwidth `h` in guidance-feature units.
    pub bandwidth: T,
    /// Largest blend weight for already-valid pixels.
    pub gamma_max: T,
    /// Certainty threshold ε; `γ_p = γ_max·min(1, σ̂²_p/ε)`.
    pub eps: T,
    /// When false, `γ_p = γ_max` everywhere.
    pub use_sigma2: bool,
    /// Propagate the residual `depth − D_μ̂` instead of raw depth, so filled
    /// pixels inherit the shape of `D_μ̂`.
    pub anchor: bool,
}

impl<T: Scalar> Default for MspnParams<T> {
    fn default() -> Self {
        Self {
            bandwidth: T::lit(0.5),
            gamma_max: T::lit(0.3),
            eps: T::lit(0.01),
            use_sigma2: true,
            anchor: false,
        }
    }
}

impl<T: Scalar> MspnParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.bandwidth > T::zero()
            && self.gamma_max >= T::zero()
            && self.gamma_max <= T::one()
            && self.eps > T::zero();
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid propagation parameters {self:?}")));
        }
        Ok(())
    }

    #[inline]
    pub fn gamma(&self, sigma2: T) -> T {
        if self.use_sigma2 {
            self.gamma_max * (sigma2 / self.eps).min(T::one())
        } else {
            self.gamma_max
        }
    }
}

/// One Jacobi-style propagation step with a `window × window` neighborhood.
///
/// An invalid pixel with at least one valid neighbor takes the
/// affinity-weighted average `Σ α_pq·v_q / Σ α_pq` over valid `q`, with
/// `α_pq = exp(−‖g_p − g_q‖²/h²)`, and becomes valid. A valid pixel moves a
/// fraction `γ_p` toward the same average (which includes itself). Here `v`
/// is the depth, or the residual from `d_mu` when anchoring.
pub fn mspn_step<T: Scalar>(
    state: &RefineState<T>,
    g: &GuidanceFeatures<T>,
    window: usize,
    d_mu: &Grid<T>,
    sigma2: &Grid<T>,
    params: &MspnParams<T>,
) -> Result<RefineState<T>> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "window {window} must be odd and >= 3"
        )));
    }
    params.validate()?;
    let dims = state.depth.dims();
    state.mask.check_dims(dims)?;
    d_mu.check_dims(dims)?;
    sigma2.check_dims(dims)?;
    if g.dims() != dims {
        return Err(Error::dims(dims, g.dims()));
    }

    let (h, w) = dims;
    let radius = window / 2;
    let inv_h2 = T::one() / (params.bandwidth * params.bandwidth);
    let depth = state.depth.data();
    let mask = state.mask.data();
    let mu = d_mu.data();
    let s2 = sigma2.data();
    let base = |i: usize| if params.anchor { mu[i] } else { T::zero() };

    let mut out: Vec<(T, bool)> = vec![(T::zero(), false); h * w];
    out.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
        let r0 = r.saturating_sub(radius);
        let r1 = (r + radius).min(h - 1);
        for (c, slot) in row.iter_mut().enumerate() {
            let p = r * w + c;
            let c0 = c.saturating_sub(radius);
            let c1 = (c + radius).min(w - 1);
            let mut num = T::zero();
            let mut den = T::zero();
            for qr in r0..=r1 {
                for qc in c0..=c1 {
                    let q = qr * w + qc;
                    if mask[q] {
                        let a = (-g.dist2(p, q) * inv_h2).exp();
                        num = num + a * (depth[q] - base(q));
                        den = den + a;
                    }
                }
            }
            *slot = if mask[p] {
                let gamma = params.gamma(s2[p]);
                if gamma > T::zero() && den > T::zero() {
                    let target = base(p) + num / den;
                    ((T::one() - gamma) * depth[p] + gamma * target, true)
                } else {
                    (depth[p], true)
                }
            } else if den > T::zero() {
                (base(p) + num / den, true)
            } else {
                (depth[p], false)
            };
        }
    });

    let (d, m): (Vec<T>, Vec<bool>) = out.into_iter().unzip();
    Ok(RefineState {
        depth: Grid::from_vec(h, w, d)?,
        mask: Grid::from_vec(h, w, m)?,
        iteration: state.iteration + 1,
    })
}
