//! Corruption protocols: structured conditioning masks, sparse sampling,
//! Gaussian outlier injection, and hole masking at a target hole-to-image
//! ratio.

use rand::seq::index::sample;
use rand::Rng;

use crate::depth::{BitMask, DepthMap, Grid, Interval};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, standard_normal, DetRng};
use crate::scalar::Scalar;

/// Axis-aligned rectangle or inscribed ellipse, inclusive pixel bounds.
#[derive(Debug, Clone, Copy)]
struct Blob {
    r0: usize,
    c0: usize,
    h: usize,
    w: usize,
    ellipse: bool,
}

impl Blob {
    fn random(rng: &mut DetRng, dims: (usize, usize), target_side: f64, allow_ellipse: bool) -> Self {
        let (hh, ww) = dims;
        let aspect: f64 = rng.random_range(0.5..2.0);
        let side = target_side * rng.random_range(0.6..1.4);
        let h = ((side * aspect.sqrt()).round() as usize).clamp(1, hh);
        let w = ((side / aspect.sqrt()).round() as usize).clamp(1, ww);
        Self {
            r0: rng.random_range(0..=hh - h),
            c0: rng.random_range(0..=ww - w),
            h,
            w,
            ellipse: allow_ellipse && rng.random_bool(0.5),
        }
    }

    fn contains(&self, r: usize, c: usize) -> bool {
        if r < self.r0 || c < self.c0 || r >= self.r0 + self.h || c >= self.c0 + self.w {
            return false;
        }
        if !self.ellipse {
            return true;
        }
        let ry = self.h as f64 / 2.0;
        let rx = self.w as f64 / 2.0;
        let dy = (r - self.r0) as f64 + 0.5 - ry;
        let dx = (c - self.c0) as f64 + 0.5 - rx;
        (dy / ry).powi(2) + (dx / rx).powi(2) <= 1.0
    }

    /// Pixels this blob would newly set in `mask`.
    fn gain(&self, mask: &BitMask) -> usize {
        let mut n = 0;
        for r in self.r0..self.r0 + self.h {
            for c in self.c0..self.c0 + self.w {
                if !mask.get(r, c) && self.contains(r, c) {
                    n += 1;
                }
            }
        }
        n
    }

    fn paint(&self, mask: &mut BitMask) {
        for r in self.r0..self.r0 + self.h {
            for c in self.c0..self.c0 + self.w {
                if self.contains(r, c) {
                    mask.set(r, c, true);
                }
            }
        }
    }

    fn shrink(&mut self) {
        let (h, w) = (self.h.div_ceil(2).max(1), self.w.div_ceil(2).max(1));
        self.r0 += (self.h - h) / 2;
        self.c0 += (self.w - w) / 2;
        self.h = h;
        self.w = w;
    }
}

/// Grows `mask` with random blobs until it holds between `target` and `cap`
/// pixels. Requires `target <= cap`.
fn grow_to(
    mask: &mut BitMask,
    rng: &mut DetRng,
    target: usize,
    cap: usize,
    scanlines: bool,
    ellipses: bool,
) {
    let dims = mask.dims();
    let mut count = mask.count_ones();
    while count < target {
        let deficit = (target - count) as f64;
        let mut blob = if scanlines && rng.random_bool(0.3) {
            let len = rng
                .random_range(1.0..=(deficit.max(1.0)).min(dims.1 as f64))
                .round() as usize;
            let len = len.clamp(1, dims.1);
            Blob {
                r0: rng.random_range(0..dims.0),
                c0: rng.random_range(0..=dims.1 - len),
                h: 1,
                w: len,
                ellipse: false,
            }
        } else {
            let side = (deficit.sqrt() * 0.8).max(1.0);
            Blob::random(rng, dims, side, ellipses)
        };
        loop {
            let gain = blob.gain(mask);
            if count + gain <= cap {
                blob.paint(mask);
                count += gain;
                break;
            }
            if blob.h == 1 && blob.w == 1 {
                // unreachable while count < target <= cap; guard anyway
                break;
            }
            blob.shrink();
        }
    }
}

/// Random union of rectangles and scanline runs keeping roughly `coverage`
/// of the pixels (within ±2%).
pub fn random_structured_mask(dims: (usize, usize), seed: u64, coverage: f64) -> Result<BitMask> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::InvalidRange(format!("coverage {coverage} outside (0, 1]")));
    }
    let n = dims.0 * dims.1;
    if coverage == 1.0 {
        return Ok(Grid::filled(dims.0, dims.1, true));
    }
    let mut rng = rng_from_seed(seed);
    let mut mask = Grid::filled(dims.0, dims.1, false);
    let tol = (0.02 * n as f64).floor() as usize;
    let center = (coverage * n as f64).round() as usize;
    let target = center.saturating_sub(tol / 2).max(1);
    let cap = (center + tol / 2).min(n).max(target);
    grow_to(&mut mask, &mut rng, target, cap, true, false);
    Ok(mask)
}

/// Keeps exactly `n` valid pixels chosen uniformly without replacement.
pub fn sample_sparse<T: Scalar>(depth: &DepthMap<T>, n: usize, seed: u64) -> Result<DepthMap<T>> {
    let valid: Vec<usize> = depth
        .values()
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v > T::zero()).then_some(i))
        .collect();
    if n > valid.len() {
        return Err(Error::TooFewValidPixels {
            requested: n,
            available: valid.len(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut out = vec![T::zero(); depth.values().len()];
    for k in sample(&mut rng, valid.len(), n) {
        let i = valid[k];
        out[i] = depth.values()[i];
    }
    DepthMap::from_vec(depth.height(), depth.width(), out)
}

/// Adds `N(0, sigma²)` to `round(ratio * #valid)` random valid pixels,
/// clamping at zero. A pixel clamped to exactly zero reads as missing
/// afterwards; it is still flagged in the returned corruption mask.
pub fn inject_gaussian_noise<T: Scalar>(
    depth: &DepthMap<T>,
    ratio: f64,
    sigma: f64,
    seed: u64,
) -> Result<(DepthMap<T>, BitMask)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidRange(format!("noise ratio {ratio} outside [0, 1]")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidRange(format!("noise sigma {sigma} must be >= 0")));
    }
    let valid: Vec<usize> = depth
        .values()
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v > T::zero()).then_some(i))
        .collect();
    let k = (ratio * valid.len() as f64).round() as usize;
    let mut rng = rng_from_seed(seed);
    let mut values = depth.values().to_vec();
    let mut corrupted = Grid::filled(depth.height(), depth.width(), false);
    let mut picks = sample(&mut rng, valid.len(), k).into_vec();
    picks.sort_unstable();
    let sigma_t = T::lit(sigma);
    for j in picks {
        let i = valid[j];
        let z: T = standard_normal(&mut rng);
        values[i] = (values[i] + sigma_t * z).max(T::zero());
        corrupted.data_mut()[i] = true;
    }
    Ok((DepthMap::from_vec(depth.height(), depth.width(), values)?, corrupted))
}

/// Removes random rectangles and ellipses until the hole-to-image ratio lands
/// in `(h2i.lo, h2i.hi]`. `[0, 0]` leaves the map untouched.
pub fn mask_holes<T: Scalar>(
    depth: &DepthMap<T>,
    h2i: Interval,
    seed: u64,
) -> Result<(DepthMap<T>, BitMask)> {
    if !(h2i.lo >= 0.0 && h2i.hi <= 1.0 && h2i.lo <= h2i.hi) {
        return Err(Error::InvalidRange(format!(
            "hole ratio range [{}, {}] must lie in [0, 1]",
            h2i.lo, h2i.hi
        )));
    }
    let (h, w) = depth.dims();
    let n = h * w;
    if h2i.hi == 0.0 {
        return Ok((depth.clone(), Grid::filled(h, w, false)));
    }
    let lo_count = (h2i.lo * n as f64).floor() as usize + 1;
    let hi_count = (h2i.hi * n as f64 + 1e-9).floor() as usize;
    if lo_count > hi_count {
        return Err(Error::InfeasibleRange {
            lo: h2i.lo,
            hi: h2i.hi,
        });
    }
    let mut rng = rng_from_seed(seed);
    let target = rng.random_range(lo_count..=hi_count);
    let mut holes = Grid::filled(h, w, false);
    // a handful of large blobs rather than a single one
    let pieces = rng.random_range(1..=4usize);
    for p in 1..=pieces {
        let step = (target * p / pieces).max(lo_count.min(target));
        grow_to(&mut holes, &mut rng, step, hi_count, false, true);
    }
    let out = depth.masked(&holes.not())?;
    Ok((out, holes))
}

/// Which corruption protocol to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptionMode {
    /// Sparse sampling followed by Gaussian outlier injection.
    SparseNoise,
    /// Hole masking at a hole-to-image ratio.
    Holes,
    /// Keep pixels under a random structured mask.
    StructuredMask,
}

impl std::str::FromStr for CorruptionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse+noise" | "sparse-noise" => Ok(Self::SparseNoise),
            "holes" => Ok(Self::Holes),
            "structured-mask" => Ok(Self::StructuredMask),
            other => Err(Error::InvalidConfig(format!("unknown corruption mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for CorruptionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SparseNoise => "sparse+noise",
            Self::Holes => "holes",
            Self::StructuredMask => "structured-mask",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub mode: CorruptionMode,
    pub noise_ratio: f64,
    /// Absolute noise standard deviation in scene units; `None` means 15% of
    /// the valid depth range.
    pub noise_sigma: Option<f64>,
    pub sparse_count: usize,
    pub h2i_range: Interval,
    /// Kept fraction for the structured-mask mode.
    pub coverage: f64,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            mode: CorruptionMode::SparseNoise,
            noise_ratio: 0.1,
            noise_sigma: None,
            sparse_count: 500,
            h2i_range: Interval { lo: 0.01, hi: 0.1 },
            coverage: 0.5,
            seed: 0,
        }
    }
}

/// Result of a corruption protocol: the degraded depth and the pixels the
/// protocol touched (noisy pixels, or removed holes).
#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted<T> {
    pub depth: DepthMap<T>,
    pub affected: BitMask,
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_ratio) {
            return Err(Error::InvalidRange(format!(
                "noise ratio {} outside [0, 1]",
                self.noise_ratio
            )));
        }
        if !(0.0 <= self.h2i_range.lo && self.h2i_range.hi <= 1.0) {
            return Err(Error::InvalidRange("h2i range must lie in [0, 1]".into()));
        }
        if self.sparse_count == 0 {
            return Err(Error::InvalidRange("sparse_count must be >= 1".into()));
        }
        Ok(())
    }

    pub fn apply<T: Scalar>(&self, depth_true: &DepthMap<T>) -> Result<Corrupted<T>> {
        self.validate()?;
        match self.mode {
            CorruptionMode::SparseNoise => {
                let sparse = sample_sparse(depth_true, self.sparse_count, self.seed)?;
                let sigma = match self.noise_sigma {
                    Some(s) => s,
                    None => {
                        let (lo, hi) = depth_true.valid_range().unwrap_or((T::zero(), T::zero()));
                        0.15 * (hi - lo).as_f64()
                    }
                };
                let (depth, affected) = inject_gaussian_noise(
                    &sparse,
                    self.noise_ratio,
                    sigma,
                    crate::rng::derive_seed(self.seed, 1),
                )?;
                Ok(Corrupted { depth, affected })
            }
            CorruptionMode::Holes => {
                let (depth, affected) = mask_holes(depth_true, self.h2i_range, self.seed)?;
                Ok(Corrupted { depth, affected })
            }
            CorruptionMode::StructuredMask => {
                let keep = random_structured_mask(depth_true.dims(), self.seed, self.coverage)?;
                Ok(Corrupted {
                    depth: depth_true.masked(&keep)?,
                    affected: keep.not(),
                })
            }
        }
    }
}
