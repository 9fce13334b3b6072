use crate::depth::{DepthMap, Grid, RgbImage};
use crate::error::Result;
use crate::scalar::Scalar;

pub const GUIDANCE_CHANNELS: usize = 8;

/// Channel layout of [`GuidanceFeatures`].
pub mod channel {
    pub const RED: usize = 0;
    pub const GREEN: usize = 1;
    pub const BLUE: usize = 2;
    pub const RGB_GRADIENT: usize = 3;
    pub const DEPTH: usize = 4;
    pub const DEPTH_GRADIENT: usize = 5;
    pub const VARIANCE: usize = 6;
    pub const CERTAIN: usize = 7;
}

/// Per-pixel feature vectors, every channel rescaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceFeatures<T> {
    features: Grid<[T; GUIDANCE_CHANNELS]>,
}

impl<T: Scalar> GuidanceFeatures<T> {
    pub fn new(features: Grid<[T; GUIDANCE_CHANNELS]>) -> Self {
        Self { features }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.features.dims()
    }

    pub fn grid(&self) -> &Grid<[T; GUIDANCE_CHANNELS]> {
        &self.features
    }

    pub fn at(&self, i: usize) -> &[T; GUIDANCE_CHANNELS] {
        &self.features.data()[i]
    }

    pub fn channel(&self, k: usize) -> Grid<T> {
        self.features.map(|f| f[k])
    }

    #[inline]
    pub fn dist2(&self, p: usize, q: usize) -> T {
        let (a, b) = (self.at(p), self.at(q));
        let mut s = T::zero();
        for k in 0..GUIDANCE_CHANNELS {
            let d = a[k] - b[k];
            s = s + d * d;
        }
        s
    }

    /// Copy with the variance and certainty channels zeroed, for running the
    /// refinement blind to the ensemble uncertainty.
    pub fn without_uncertainty(&self) -> Self {
        Self {
            features: self.features.map(|mut f| {
                f[channel::VARIANCE] = T::zero();
                f[channel::CERTAIN] = T::zero();
                f
            }),
        }
    }
}

/// `|∇f|²` with central differences and edge replication (one-sided halved
/// differences at the border).
fn gradient_sq<T: Scalar>(h: usize, w: usize, f: impl Fn(usize, usize) -> T) -> Grid<T> {
    let half = T::lit(0.5);
    Grid::from_fn(h, w, |r, c| {
        let gx = (f(r, (c + 1).min(w - 1)) - f(r, c.saturating_sub(1))) * half;
        let gy = (f((r + 1).min(h - 1), c) - f(r.saturating_sub(1), c)) * half;
        gx * gx + gy * gy
    })
}

fn rescale_unit<T: Scalar>(g: &Grid<T>) -> Grid<T> {
    let (lo, hi) = g
        .data()
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if !(span > T::zero()) || !span.is_finite() {
        return g.map(|_| T::zero());
    }
    g.map(|v| (v - lo) / span)
}

/// Assembles RGB, `|∇RGB|`, depth, `|∇depth|`, `σ̂²` and the certainty bit
/// (valid pixels of `d_rel`). `d_mu` may be in any affine depth unit; the
/// rescaling makes the features independent of it.
pub fn guidance_features<T: Scalar>(
    i: &RgbImage<T>,
    d_rel: &DepthMap<T>,
    d_mu: &Grid<T>,
    sigma2: &Grid<T>,
) -> Result<GuidanceFeatures<T>> {
    let dims = i.dims();
    d_rel.grid().check_dims(dims)?;
    d_mu.check_dims(dims)?;
    sigma2.check_dims(dims)?;
    let (h, w) = dims;
    let rgb = i.grid();

    let mut chans: Vec<Grid<T>> = (0..3).map(|k| rgb.map(|p| p[k])).collect();
    let mut grad2 = Grid::filled(h, w, T::zero());
    for ch in chans.iter().take(3) {
        let g = gradient_sq(h, w, |r, c| ch.get(r, c));
        grad2 = grad2.zip_map(&g, |a, b| a + b)?;
    }
    chans.push(grad2.map(|v| v.sqrt()));
    chans.push(d_mu.clone());
    chans.push(gradient_sq(h, w, |r, c| d_mu.get(r, c)).map(|v| v.sqrt()));
    chans.push(sigma2.clone());
    chans.push(d_rel.grid().map(|v| if v > T::zero() { T::one() } else { T::zero() }));

    let scaled: Vec<Grid<T>> = chans.iter().map(rescale_unit).collect();
    let features = Grid::from_fn(h, w, |r, c| {
        let mut f = [T::zero(); GUIDANCE_CHANNELS];
        for (k, g) in scaled.iter().enumerate() {
            f[k] = g.get(r, c);
        }
        f
    });
    Ok(GuidanceFeatures { features })
}
