use crate::depth::Grid;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-pixel sample mean and population variance (`1/N`) of an ensemble of
/// reconstructions, in normalized depth units.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats<T> {
    pub mu_hat: Grid<T>,
    pub sigma2_hat: Grid<T>,
    pub n_samples: usize,
}

/// Reduces samples to mean and `1/N` variance.
///
/// Each pixel's values are sorted before summation, which makes the result
/// bit-identical under any permutation of `samples`.
pub fn ensemble_stats<T: Scalar>(samples: &[Grid<T>]) -> Result<EnsembleStats<T>> {
    let first = samples.first().ok_or(Error::EmptyEnsemble)?;
    let dims = first.dims();
    for s in samples {
        s.check_dims(dims)?;
    }
    let n = samples.len();
    let inv_n = T::one() / T::from_count(n);
    let len = first.len();
    let mut mu = Vec::with_capacity(len);
    let mut var = Vec::with_capacity(len);
    let mut column = vec![T::zero(); n];
    for i in 0..len {
        for (slot, s) in column.iter_mut().zip(samples) {
            *slot = s.data()[i];
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        if column[0] == column[n - 1] {
            mu.push(column[0]);
            var.push(T::zero());
            continue;
        }
        let mean = column.iter().copied().fold(T::zero(), |a, b| a + b) * inv_n;
        let ss = column
            .iter()
            .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
        mu.push(mean);
        var.push(ss * inv_n);
    }
    Ok(EnsembleStats {
        mu_hat: Grid::from_vec(dims.0, dims.1, mu)?,
        sigma2_hat: Grid::from_vec(dims.0, dims.1, var)?,
        n_samples: n,
    })
}
