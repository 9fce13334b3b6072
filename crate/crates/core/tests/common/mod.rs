//! Random stage-2 problems and invariant checks shared by the property
//! tests and the acceptance run.

#![allow(dead_code)]

use depthforge::depth::{BitMask, DepthMap, Grid, RgbImage};
use depthforge::refine::{
    certainty_mask, guidance_features, morphological_open, mspn_step, refine_scene, MspnParams,
    RefineConfig, RefineState,
};
use depthforge::stochastic::EnsembleStats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

/// A random stage-2 problem: image, sparse scene-unit depth, and stage-1
/// statistics.
#[derive(Debug, Clone)]
pub struct Case {
    pub rgb: RgbImage<f64>,
    pub depth: DepthMap<f64>,
    pub mask: BitMask,
    pub mu: Grid<f64>,
    pub sigma2: Grid<f64>,
}

pub fn case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = rng.random_range(3..=12);
    let w = rng.random_range(3..=12);
    let density = rng.random_range(0.05..0.9);
    let mut mask = Grid::from_fn(h, w, |_, _| rng.random_bool(density));
    if mask.count_ones() < 2 {
        mask.set(0, 0, true);
        mask.set(h - 1, w - 1, true);
    }
    let depth = Grid::from_fn(h, w, |r, c| {
        if mask.get(r, c) {
            rng.random_range(0.5..8.0)
        } else {
            0.0
        }
    });
    // distinct support values keep the scale-shift fit regular
    let mu = Grid::from_fn(h, w, |r, c| (r * w + c) as f64 / (h * w) as f64 + rng.random_range(-0.2..0.2));
    let sigma2 = Grid::from_fn(h, w, |r, c| {
        if mask.get(r, c) && rng.random_bool(0.8) {
            rng.random_range(0.0..0.01)
        } else {
            rng.random_range(0.0..0.5)
        }
    });
    let rgb = RgbImage::new(Grid::from_fn(h, w, |_, _| {
        [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]
    }))
    .unwrap();
    Case {
        rgb,
        depth: DepthMap::new(depth).unwrap(),
        mask,
        mu,
        sigma2,
    }
}

pub fn stats(c: &Case) -> EnsembleStats<f64> {
    EnsembleStats {
        mu_hat: c.mu.clone(),
        sigma2_hat: c.sigma2.clone(),
        n_samples: 10,
    }
}

pub fn random_mask(seed: u64) -> BitMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (rng.random_range(1..=14), rng.random_range(1..=14));
    let p = rng.random_range(0.0..1.0);
    Grid::from_fn(h, w, |_, _| rng.random_bool(p))
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Four non-anchored propagation steps: the valid set only grows and every
/// valid value stays inside the range of the previously valid values in its
/// window.
pub fn check_propagation(seed: u64, gamma: f64, win: usize) -> Check {
    let c = case(seed);
    let params = MspnParams { gamma_max: gamma, anchor: false, ..MspnParams::default() };
    let g = guidance_features(&c.rgb, &c.depth, &c.mu, &c.sigma2).map_err(|e| e.to_string())?;
    let mut state = RefineState::new(c.depth.grid().clone(), c.mask.clone()).map_err(|e| e.to_string())?;
    let (h, w) = state.depth.dims();
    let zeros = Grid::filled(h, w, 0.0);
    let rad = win / 2;
    for step in 0..4 {
        let next = mspn_step(&state, &g, win, &zeros, &c.sigma2, &params).map_err(|e| e.to_string())?;
        ensure!(state.mask.is_subset_of(&next.mask), "step {step}: mask shrank");
        for r in 0..h {
            for col in 0..w {
                if !next.mask.get(r, col) {
                    continue;
                }
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for qr in r.saturating_sub(rad)..=(r + rad).min(h - 1) {
                    for qc in col.saturating_sub(rad)..=(col + rad).min(w - 1) {
                        if state.mask.get(qr, qc) {
                            lo = lo.min(state.depth.get(qr, qc));
                            hi = hi.max(state.depth.get(qr, qc));
                        }
                    }
                }
                let v = next.depth.get(r, col);
                let slack = 1e-12 * hi.abs().max(1.0);
                ensure!(v >= lo - slack && v <= hi + slack, "step {step} ({r},{col}): {v} outside [{lo}, {hi}]");
            }
        }
        state = next;
    }
    Ok(())
}

pub fn check_opening(seed: u64, radius: usize) -> Check {
    let m = random_mask(seed);
    let o = morphological_open(&m, radius);
    ensure!(o.is_subset_of(&m), "opening is not anti-extensive");
    ensure!(morphological_open(&o, radius) == o, "opening is not idempotent");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let sup = m.map(|b| b || rng.random_bool(0.3));
    ensure!(o.is_subset_of(&morphological_open(&sup, radius)), "opening is not increasing");
    Ok(())
}

pub fn check_certainty_monotone(seed: u64, e1: f64, e2: f64) -> Check {
    let c = case(seed);
    let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
    ensure!(
        certainty_mask(&c.sigma2, lo).is_subset_of(&certainty_mask(&c.sigma2, hi)),
        "mask({lo}) not inside mask({hi})"
    );
    Ok(())
}

fn stage2_config() -> RefineConfig<f64> {
    RefineConfig { eps: 0.02, ..RefineConfig::default() }
}

/// Stage 2 on `a·d + b` equals `a·(stage 2 on d) + b`, up to rounding.
pub fn check_equivariance(seed: u64, a: f64, b: f64) -> Check {
    let c = case(seed);
    let st = stats(&c);
    let cfg = stage2_config();
    let base = refine_scene(&c.depth, &c.mask, &st, &c.rgb, &cfg);
    let moved = DepthMap::new(c.depth.grid().map(|v| if v > 0.0 { a * v + b } else { 0.0 })).unwrap();
    let other = refine_scene(&moved, &c.mask, &st, &c.rgb, &cfg);
    match (base, other) {
        (Ok(x), Ok(y)) => {
            ensure!(x.mask == y.mask, "final masks differ");
            for (u, v) in x.depth.values().iter().zip(y.depth.values()) {
                let want = a * u + b;
                ensure!((v - want).abs() <= 1e-9 * want.abs().max(1.0), "{v} vs {want}");
            }
            Ok(())
        }
        (Err(e1), Err(e2)) if e1.to_string() == e2.to_string() => Ok(()),
        (x, y) => Err(format!("outcomes differ: {:?} / {:?}", x.err(), y.err())),
    }
}

pub fn check_determinism(seed: u64) -> Check {
    let c = case(seed);
    let cfg = stage2_config();
    let x = refine_scene(&c.depth, &c.mask, &stats(&c), &c.rgb, &cfg).ok();
    let y = refine_scene(&c.depth, &c.mask, &stats(&c), &c.rgb, &cfg).ok();
    ensure!(x == y, "reruns differ");
    Ok(())
}
