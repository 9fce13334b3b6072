use crate::depth::{BitMask, DepthMap, Grid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `1` where `σ̂² ≤ ε`, `0` where `σ̂² > ε`.
pub fn certainty_mask<T: Scalar>(sigma2_hat: &Grid<T>, eps: T) -> BitMask {
    sigma2_hat.map(|v| !(v > eps))
}

/// Erosion followed by dilation with a `(2r+1)²` square. Window positions
/// outside the image are clamped to the border, so an all-ones mask is a
/// fixed point.
pub fn morphological_open(m: &BitMask, radius: usize) -> BitMask {
    if radius == 0 {
        return m.clone();
    }
    let eroded = separable(m, radius, true);
    separable(&eroded, radius, false)
}

/// Square erosion (`all`) or dilation (`any`) as two 1-D passes.
fn separable(m: &BitMask, radius: usize, erode: bool) -> BitMask {
    let (h, w) = m.dims();
    let pass = |src: &BitMask, horizontal: bool| {
        Grid::from_fn(h, w, |r, c| {
            let (pos, len) = if horizontal { (c, w) } else { (r, h) };
            let lo = pos.saturating_sub(radius);
            let hi = (pos + radius).min(len - 1);
            let mut vals = (lo..=hi).map(|k| {
                if horizontal {
                    src.get(r, k)
                } else {
                    src.get(k, c)
                }
            });
            if erode {
                vals.all(|b| b)
            } else {
                vals.any(|b| b)
            }
        })
    };
    let rows = pass(m, true);
    pass(&rows, false)
}

/// `D_rel = d_cond ⊗ m ⊗ m_sigma`, together with the mask `m ⊗ m_sigma`.
pub fn reliable_depth<T: Scalar>(
    d_cond: &DepthMap<T>,
    m: &BitMask,
    m_sigma: &BitMask,
) -> Result<(DepthMap<T>, BitMask)> {
    let dims = d_cond.dims();
    m.check_dims(dims)?;
    m_sigma.check_dims(dims)?;
    let mask = m.and(m_sigma)?;
    if mask.count_ones() == 0 {
        return Err(Error::EmptyReliableSet);
    }
    Ok((d_cond.masked(&mask)?, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(rows: &[&str]) -> BitMask {
        let h = rows.len();
        let w = rows[0].len();
        Grid::from_fn(h, w, |r, c| rows[r].as_bytes()[c] == b'1')
    }

    #[test]
    fn certainty_threshold() {
        let s = Grid::from_vec(1, 2, vec![0.005, 0.02]).unwrap();
        assert_eq!(certainty_mask(&s, 0.01).data(), &[true, false]);
        let zero = Grid::filled(3, 3, 0.0);
        assert_eq!(certainty_mask(&zero, 0.01).count_ones(), 9);
        let big = Grid::from_vec(1, 3, vec![1e3, 1e300, 0.5]).unwrap();
        assert_eq!(certainty_mask(&big, f64::INFINITY).count_ones(), 3);
        // boundary: σ̂² = ε is kept
        assert!(certainty_mask(&Grid::filled(1, 1, 0.01), 0.01).data()[0]);
    }

    #[test]
    fn opening_basics() {
        let isolated = mask(&["00000", "00100", "00000"]);
        assert_eq!(morphological_open(&isolated, 1).count_ones(), 0);
        let ones = Grid::filled(4, 7, true);
        for r in 0..4 {
            assert_eq!(morphological_open(&ones, r), ones);
        }
        assert_eq!(morphological_open(&isolated, 0), isolated);
    }

    #[test]
    fn opening_keeps_blocks_and_drops_thin_lines() {
        let m = mask(&[
            "1110000", //
            "1110000", //
            "1110001", //
            "0000001", //
            "1111111", //
        ]);
        let expect = mask(&[
            "1110000", //
            "1110000", //
            "1110000", //
            "0000000", //
            "0000000", //
        ]);
        assert_eq!(morphological_open(&m, 1), expect);
    }

    #[test]
    fn block_touching_border_survives() {
        // a 2-wide strip on the left edge fits a clamped 3x3 window
        let m = mask(&["1100", "1100", "1100"]);
        assert_eq!(morphological_open(&m, 1), m);
    }

    #[test]
    fn reliable_depth_is_intersection() {
        let d = DepthMap::from_vec(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = Grid::from_vec(1, 4, vec![true, true, false, true]).unwrap();
        let ms = Grid::from_vec(1, 4, vec![true, false, true, true]).unwrap();
        let (rel, mask) = reliable_depth(&d, &m, &ms).unwrap();
        assert_eq!(mask.data(), &[true, false, false, true]);
        assert_eq!(rel.values(), &[1.0, 0.0, 0.0, 4.0]);

        let all = Grid::filled(1, 4, true);
        let (rel, _) = reliable_depth(&d, &m, &all).unwrap();
        assert_eq!(rel, d.masked(&m).unwrap());
        assert!(matches!(
            reliable_depth(&d, &m, &Grid::filled(1, 4, false)),
            Err(Error::EmptyReliableSet)
        ));
    }
}
