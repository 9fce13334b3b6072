//! Depth evaluation: RMSE, threshold accuracy `δ_k` and Kendall's τ over a
//! pixel mask.

use std::cmp::Ordering;

use crate::depth::{BitMask, DepthMap};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column names of [`EvalReport::csv_row`].
pub const CSV_HEADER: &str = "run_id,protocol,condition,rmse,delta_1.25,tau,n_pixels,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T> {
    pub rmse: T,
    /// `(k, δ_k)` pairs in the order requested.
    pub delta: Vec<(T, T)>,
    pub kendall_tau: T,
    pub n_pixels: usize,
}

impl<T: Scalar> EvalReport<T> {
    pub fn delta_at(&self, k: T) -> Option<T> {
        self.delta.iter().find(|(kk, _)| *kk == k).map(|&(_, v)| v)
    }

    /// One CSV line matching [`CSV_HEADER`]; `delta_1.25` is empty when that
    /// threshold was not evaluated.
    pub fn csv_row(&self, run_id: &str, protocol: &str, condition: f64, seed: u64) -> String {
        let d = self
            .delta_at(T::lit(1.25))
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        format!(
            "{run_id},{protocol},{condition},{},{d},{},{},{seed}",
            self.rmse, self.kendall_tau, self.n_pixels
        )
    }
}

fn masked_pairs<T: Scalar>(
    d_hat: &DepthMap<T>,
    d_true: &DepthMap<T>,
    m: &BitMask,
) -> Result<Vec<(T, T)>> {
    let dims = d_true.dims();
    d_hat.grid().check_dims(dims)?;
    m.check_dims(dims)?;
    let pairs: Vec<(T, T)> = m
        .ones()
        .into_iter()
        .map(|i| (d_hat.values()[i], d_true.values()[i]))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(pairs)
}

/// `sqrt(mean((d̂ − d)²))` over masked pixels.
pub fn rmse<T: Scalar>(d_hat: &DepthMap<T>, d_true: &DepthMap<T>, m: &BitMask) -> Result<T> {
    let pairs = masked_pairs(d_hat, d_true, m)?;
    let sse = pairs.iter().fold(T::zero(), |acc, &(a, b)| acc + (a - b) * (a - b));
    Ok((sse / T::from_count(pairs.len())).sqrt())
}

/// Fraction of masked pixels with `max(d̂/d, d/d̂) < k`.
pub fn delta_k<T: Scalar>(d_hat: &DepthMap<T>, d_true: &DepthMap<T>, m: &BitMask, k: T) -> Result<T> {
    if !(k > T::one()) {
        return Err(Error::InvalidConfig(format!("delta threshold {k} must be > 1")));
    }
    let pairs = masked_pairs(d_hat, d_true, m)?;
    let mut hits = 0usize;
    for &(a, b) in &pairs {
        if !(a > T::zero() && b > T::zero()) {
            return Err(Error::NonPositiveDepth);
        }
        if (a / b).max(b / a) < k {
            hits += 1;
        }
    }
    Ok(T::from_count(hits) / T::from_count(pairs.len()))
}

/// Kendall's τ-a over masked pixels: ties count as neither concordant nor
/// discordant and the denominator is `n(n−1)/2`.
pub fn kendall_tau<T: Scalar>(d_hat: &DepthMap<T>, d_true: &DepthMap<T>, m: &BitMask) -> Result<T> {
    let pairs = masked_pairs(d_hat, d_true, m)?;
    let (x, y): (Vec<T>, Vec<T>) = pairs.into_iter().unzip();
    kendall_tau_slices(&x, &y)
}

/// τ-a of two equal-length samples.
pub fn kendall_tau_slices<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    let (score, pairs) = kendall_score(x, y)?;
    Ok(T::lit(score as f64) / T::lit(pairs as f64))
}

fn cmp<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("finite depth values")
}

fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for i in 1..=sorted.len() {
        if i < sorted.len() && sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total
}

/// `(n_c − n_d, n(n−1)/2)` by Knight's merge-sort method in `O(n log n)`.
pub fn kendall_score<T: Scalar>(x: &[T], y: &[T]) -> Result<(i64, u64)> {
    if x.len() != y.len() {
        return Err(Error::dims((1, y.len()), (1, x.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientPairs(n));
    }
    let mut pts: Vec<(T, T)> = x.iter().copied().zip(y.iter().copied()).collect();
    pts.sort_by(|a, b| cmp(&a.0, &b.0).then_with(|| cmp(&a.1, &b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let xs: Vec<T> = pts.iter().map(|p| p.0).collect();
    let n1 = tied_pairs(&xs);
    let n3 = tied_pairs(&pts);

    let mut ys: Vec<T> = pts.iter().map(|p| p.1).collect();
    let mut buf = ys.clone();
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);

    let score = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    Ok((score, n0))
}

/// Stable merge sort of `v`, returning the number of strict inversions.
fn merge_count<T: Scalar>(v: &mut [T], buf: &mut [T]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if cmp(&v[j], &v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// RMSE, `δ_k` for every `k` in `ks`, and τ over the same mask.
pub fn evaluate<T: Scalar>(
    d_hat: &DepthMap<T>,
    d_true: &DepthMap<T>,
    m: &BitMask,
    ks: &[T],
) -> Result<EvalReport<T>> {
    let rmse = rmse(d_hat, d_true, m)?;
    let delta = ks
        .iter()
        .map(|&k| delta_k(d_hat, d_true, m, k).map(|v| (k, v)))
        .collect::<Result<Vec<_>>>()?;
    let kendall_tau = kendall_tau(d_hat, d_true, m)?;
    Ok(EvalReport {
        rmse,
        delta,
        kendall_tau,
        n_pixels: m.count_ones(),
    })
}
