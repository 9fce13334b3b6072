//! Grids, masks, depth maps and RGB images, plus depth normalization.
//!
//! A depth value of zero means "missing". Once depth is normalized to
//! `[-1, 1]`, zero becomes a legal value, so every normalized field travels
//! together with an explicit [`BitMask`] that is authoritative from then on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major `height × width` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

/// Binary validity / selection mask.
pub type BitMask = Grid<bool>;

impl<T: Copy> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidConfig(format!(
                "{} values cannot fill a {height}x{width} grid",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        let i = self.index(row, col);
        self.data[i] = value;
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    pub fn zip_map<U: Copy, V: Copy>(
        &self,
        other: &Grid<U>,
        mut f: impl FnMut(T, U) -> V,
    ) -> Result<Grid<V>> {
        self.check_dims(other.dims())?;
        Ok(Grid {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(Error::dims(self.dims(), other));
        }
        Ok(())
    }
}

impl BitMask {
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn coverage(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.count_ones() as f64 / self.data.len() as f64
    }

    pub fn and(&self, other: &BitMask) -> Result<BitMask> {
        self.zip_map(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BitMask) -> Result<BitMask> {
        self.zip_map(other, |a, b| a || b)
    }

    pub fn not(&self) -> BitMask {
        self.map(|b| !b)
    }

    /// `true` when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitMask) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// Flat indices of set pixels, in row-major order.
    pub fn ones(&self) -> Vec<usize> {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// Depth in scene units. Every value is finite and `>= 0`; `0` encodes a
/// missing measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap<T> {
    grid: Grid<T>,
}

impl<T: Scalar> DepthMap<T> {
    pub fn new(grid: Grid<T>) -> Result<Self> {
        if let Some((index, &v)) = grid
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < T::zero())
        {
            return Err(Error::InvalidDepth {
                index,
                value: v.as_f64(),
            });
        }
        Ok(Self { grid })
    }

    pub fn from_vec(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        Self::new(Grid::from_vec(height, width, values)?)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            grid: Grid::filled(height, width, T::zero()),
        }
    }

    /// Builds a depth map, replacing anything negative or non-finite with
    /// "missing".
    pub fn sanitized(grid: Grid<T>) -> Self {
        Self {
            grid: grid.map(|v| if v.is_finite() && v > T::zero() { v } else { T::zero() }),
        }
    }

    /// Treats depths above `cap` (including infinities) as missing.
    pub fn with_depth_cap(&self, cap: T) -> Self {
        Self::sanitized(self.grid.map(|v| if v > cap { T::zero() } else { v }))
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn into_grid(self) -> Grid<T> {
        self.grid
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.grid.height()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.grid.width()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.grid.get(row, col)
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        self.grid.data()
    }

    pub fn valid_count(&self) -> usize {
        self.values().iter().filter(|&&v| v > T::zero()).count()
    }

    /// Zeroes every pixel outside `mask`.
    pub fn masked(&self, mask: &BitMask) -> Result<Self> {
        Ok(Self {
            grid: self
                .grid
                .zip_map(mask, |v, keep| if keep { v } else { T::zero() })?,
        })
    }

    /// Minimum and maximum over valid pixels.
    pub fn valid_range(&self) -> Option<(T, T)> {
        self.values()
            .iter()
            .copied()
            .filter(|&v| v > T::zero())
            .fold(None, |acc, v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}

/// Three-channel image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage<T> {
    grid: Grid<[T; 3]>,
}

impl<T: Scalar> RgbImage<T> {
    pub fn new(grid: Grid<[T; 3]>) -> Result<Self> {
        let bad = grid
            .data()
            .iter()
            .flatten()
            .find(|v| !(**v >= T::zero() && **v <= T::one()));
        if let Some(v) = bad {
            return Err(Error::InvalidConfig(format!(
                "rgb intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self { grid })
    }

    pub fn uniform(height: usize, width: usize, color: [T; 3]) -> Result<Self> {
        Self::new(Grid::filled(height, width, color))
    }

    #[inline]
    pub fn grid(&self) -> &Grid<[T; 3]> {
        &self.grid
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [T; 3] {
        self.grid.get(row, col)
    }

    /// Squared Euclidean color distance between two flat pixel indices.
    #[inline]
    pub fn color_dist2(&self, a: usize, b: usize) -> T {
        let pa = self.grid.data()[a];
        let pb = self.grid.data()[b];
        pa.iter()
            .zip(pb.iter())
            .map(|(&x, &y)| (x - y) * (x - y))
            .fold(T::zero(), |s, v| s + v)
    }
}

/// Affine map `n = scale * d + shift` from scene depth to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams<T> {
    pub scale: T,
    pub shift: T,
}

impl<T: Scalar> NormalizationParams<T> {
    pub fn identity() -> Self {
        Self {
            scale: T::one(),
            shift: T::zero(),
        }
    }

    /// Parameters mapping `lo ↦ -1` and `hi ↦ +1`.
    pub fn from_bounds(lo: T, hi: T) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::DegenerateRange(format!("min {lo} >= max {hi}")));
        }
        let span = hi - lo;
        Ok(Self {
            scale: T::lit(2.0) / span,
            shift: -(hi + lo) / span,
        })
    }

    #[inline]
    pub fn forward(&self, depth: T) -> T {
        self.scale * depth + self.shift
    }

    #[inline]
    pub fn inverse(&self, normalized: T) -> T {
        (normalized - self.shift) / self.scale
    }
}

/// Normalized depth: values in `[-1, 1]` on valid pixels, paired with the
/// authoritative validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDepth<T> {
    pub values: Grid<T>,
    pub mask: BitMask,
}

pub fn valid_mask<T: Scalar>(depth: &DepthMap<T>) -> BitMask {
    depth.grid().map(|v| v > T::zero())
}

/// Min/max normalization over valid pixels.
pub fn normalize_depth<T: Scalar>(
    depth: &DepthMap<T>,
) -> Result<(NormalizedDepth<T>, NormalizationParams<T>)> {
    let valid = depth.valid_count();
    if valid < 2 {
        return Err(Error::DegenerateRange(format!(
            "{valid} valid pixels, need at least 2"
        )));
    }
    let (lo, hi) = depth.valid_range().expect("at least two valid pixels");
    let params = NormalizationParams::from_bounds(lo, hi)?;
    Ok((apply_normalization(depth, &params), params))
}

/// Quantile-based normalization: the `low_q` and `high_q` quantiles of the
/// valid depths map to `-1` and `+1`. Values beyond them land outside
/// `[-1, 1]`.
pub fn normalize_depth_quantile<T: Scalar>(
    depth: &DepthMap<T>,
    low_q: f64,
    high_q: f64,
) -> Result<(NormalizedDepth<T>, NormalizationParams<T>)> {
    if !(0.0..=1.0).contains(&low_q) || !(0.0..=1.0).contains(&high_q) || low_q >= high_q {
        return Err(Error::InvalidRange(format!(
            "quantiles ({low_q}, {high_q}) must satisfy 0 <= low < high <= 1"
        )));
    }
    let mut vals: Vec<T> = depth
        .values()
        .iter()
        .copied()
        .filter(|&v| v > T::zero())
        .collect();
    if vals.len() < 2 {
        return Err(Error::DegenerateRange(format!(
            "{} valid pixels, need at least 2",
            vals.len()
        )));
    }
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite depths"));
    let pick = |q: f64| vals[((vals.len() - 1) as f64 * q).round() as usize];
    let params = NormalizationParams::from_bounds(pick(low_q), pick(high_q))?;
    Ok((apply_normalization(depth, &params), params))
}

/// Normalizes `depth` with fixed parameters.
pub fn apply_normalization<T: Scalar>(
    depth: &DepthMap<T>,
    params: &NormalizationParams<T>,
) -> NormalizedDepth<T> {
    let mask = valid_mask(depth);
    let values = depth
        .grid()
        .map(|v| if v > T::zero() { params.forward(v) } else { T::zero() });
    NormalizedDepth { values, mask }
}

/// Inverse of [`normalize_depth`] on the pixels selected by `mask`; other
/// pixels come back as missing.
pub fn denormalize_depth<T: Scalar>(
    normalized: &Grid<T>,
    mask: &BitMask,
    params: &NormalizationParams<T>,
) -> Result<DepthMap<T>> {
    if !(params.scale > T::zero()) {
        return Err(Error::InvalidRange(format!(
            "normalization scale {} must be positive",
            params.scale
        )));
    }
    let grid = normalized.zip_map(mask, |v, keep| {
        if keep {
            params.inverse(v)
        } else {
            T::zero()
        }
    })?;
    Ok(DepthMap::sanitized(grid))
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidRange(format!("[{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

/// Applies a random affine change `a * d + b` to valid pixels.
///
/// The shift is clamped from below so the nearest valid pixel keeps at least
/// half of its scaled depth; missing pixels stay missing.
pub fn random_scale_shift<T: Scalar>(
    depth: &DepthMap<T>,
    seed: u64,
    a_range: Interval,
    b_range: Interval,
) -> Result<DepthMap<T>> {
    if !(a_range.lo > 0.0) {
        return Err(Error::InvalidRange(format!(
            "scale range [{}, {}] must be positive",
            a_range.lo, a_range.hi
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = a_range.sample(&mut rng);
    let mut b = b_range.sample(&mut rng);
    if let Some((lo, _)) = depth.valid_range() {
        b = b.max(-0.5 * a * lo.as_f64());
    }
    let (a, b) = (T::lit(a), T::lit(b));
    let grid = depth
        .grid()
        .map(|v| if v > T::zero() { a * v + b } else { T::zero() });
    DepthMap::new(grid)
}
