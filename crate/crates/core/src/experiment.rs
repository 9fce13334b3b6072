//! Synthetic evaluation protocols: noisy sparse completion and hole
//! inpainting over seeded scenes.

use std::fmt;
use std::str::FromStr;

use crate::depth::{valid_mask, BitMask, DepthMap, Interval, RgbImage};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport};
use crate::pipeline::{diff_only, prior_only, run_pipeline, PipelineConfig, PipelineOutput};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::synth::{generate_scene, CorruptionMode, CorruptionSpec, SceneConfig, SceneSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Sparse samples with a fraction replaced by Gaussian outliers;
    /// evaluated on every pixel.
    NoisyCompletion,
    /// Dense depth with holes at a hole-to-image ratio; evaluated on the
    /// holes.
    Inpainting,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::NoisyCompletion => "noisy-completion",
            Protocol::Inpainting => "inpainting",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noisy-completion" => Ok(Protocol::NoisyCompletion),
            "inpainting" => Ok(Protocol::Inpainting),
            _ => Err(Error::InvalidConfig(format!(
                "unknown protocol {s:?} (expected noisy-completion or inpainting)"
            ))),
        }
    }
}

/// Hole-to-image bins of the inpainting protocol.
pub const H2I_BINS: [(f64, f64); 5] = [(0.01, 0.1), (0.1, 0.2), (0.2, 0.3), (0.3, 0.4), (0.4, 0.5)];

/// Outlier fractions of the noisy-completion protocol.
pub const NOISE_RATIOS: [f64; 3] = [0.05, 0.10, 0.20];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T> {
    pub scene: SceneConfig,
    pub pipeline: PipelineConfig<T>,
    pub sparse_count: usize,
    /// Outlier standard deviation as a fraction of each scene's depth range.
    pub noise_sigma_frac: f64,
    pub ks: Vec<T>,
}

impl<T: Scalar> Default for ExperimentConfig<T> {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            pipeline: PipelineConfig::default(),
            sparse_count: 500,
            noise_sigma_frac: 0.15,
            ks: vec![T::lit(1.25)],
        }
    }
}

/// A generated scene and its corrupted observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialInput<T> {
    pub scene: SceneSample<T>,
    pub observed: DepthMap<T>,
    /// Noisy pixels, or removed hole pixels.
    pub affected: BitMask,
    /// Pixels the metrics are computed on.
    pub eval_mask: BitMask,
}

/// Builds the input of one trial. `condition` is the outlier fraction for
/// noisy completion; for inpainting it selects the H2I bin containing it.
pub fn prepare_trial<T: Scalar>(
    protocol: Protocol,
    condition: f64,
    seed: u64,
    cfg: &ExperimentConfig<T>,
) -> Result<TrialInput<T>> {
    let scene = generate_scene::<T>(seed, &cfg.scene)?;
    let (lo, hi) = scene
        .depth_true
        .valid_range()
        .ok_or_else(|| Error::DegenerateRange("scene has no valid depth".into()))?;
    let mut spec = CorruptionSpec {
        seed: derive_seed(seed, 1),
        sparse_count: cfg.sparse_count,
        ..CorruptionSpec::default()
    };
    match protocol {
        Protocol::NoisyCompletion => {
            spec.mode = CorruptionMode::SparseNoise;
            spec.noise_ratio = condition;
            spec.noise_sigma = Some(cfg.noise_sigma_frac * (hi - lo).as_f64());
        }
        Protocol::Inpainting => {
            spec.mode = CorruptionMode::Holes;
            spec.h2i_range = h2i_bin(condition)?;
        }
    }
    let c = spec.apply(&scene.depth_true)?;
    let eval_mask = match protocol {
        Protocol::NoisyCompletion => valid_mask(&scene.depth_true),
        Protocol::Inpainting => c.affected.clone(),
    };
    Ok(TrialInput {
        scene,
        observed: c.depth,
        affected: c.affected,
        eval_mask,
    })
}

/// The H2I bin `(lo, hi]` that contains `x`, or the interval `[x, x]`
/// when `x` lies outside every bin.
pub fn h2i_bin(x: f64) -> Result<Interval> {
    for (lo, hi) in H2I_BINS {
        if x > lo && x <= hi {
            return Interval::new(lo, hi);
        }
    }
    Interval::new(x, x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult<T> {
    pub refined: EvalReport<T>,
    pub diff_only: EvalReport<T>,
    /// Raw completion for noisy completion, prior-only fit for inpainting.
    pub baseline: EvalReport<T>,
    pub output: PipelineOutput<T>,
}

fn eval<T: Scalar>(d: &DepthMap<T>, input: &TrialInput<T>, ks: &[T]) -> Result<EvalReport<T>> {
    evaluate(d, &input.scene.depth_true, &input.eval_mask, ks)
}

/// Runs the pipeline on a prepared trial and scores it with its baselines.
pub fn run_trial<T: Scalar>(
    protocol: Protocol,
    input: &TrialInput<T>,
    cfg: &ExperimentConfig<T>,
    seed: u64,
) -> Result<TrialResult<T>> {
    let rgb: &RgbImage<T> = &input.scene.rgb;
    let pseed = derive_seed(seed, 2);
    let output = run_pipeline(rgb, &input.observed, &cfg.pipeline, pseed)?;
    let refined = eval(&output.refined.depth, input, &cfg.ks)?;
    let diff = diff_only(rgb, &input.observed, &output, &cfg.pipeline, pseed)?;
    let diff_only = eval(&diff.depth, input, &cfg.ks)?;
    let baseline = match protocol {
        Protocol::NoisyCompletion => {
            let raw = run_pipeline(rgb, &input.observed, &cfg.pipeline.raw_completion(), pseed)?;
            eval(&raw.refined.depth, input, &cfg.ks)?
        }
        Protocol::Inpainting => {
            let (d, _) = prior_only(rgb, &input.observed, &cfg.pipeline.estimate.gmrf)?;
            eval(&d, input, &cfg.ks)?
        }
    };
    Ok(TrialResult {
        refined,
        diff_only,
        baseline,
        output,
    })
}

/// Mean of the scalar metrics over several reports; `n_pixels` is summed.
pub fn mean_report<T: Scalar>(reports: &[EvalReport<T>]) -> Option<EvalReport<T>> {
    let first = reports.first()?;
    let n = T::from_count(reports.len());
    let sum = |f: &dyn Fn(&EvalReport<T>) -> T| reports.iter().map(f).fold(T::zero(), |a, b| a + b) / n;
    Some(EvalReport {
        rmse: sum(&|r| r.rmse),
        delta: first
            .delta
            .iter()
            .enumerate()
            .map(|(i, &(k, _))| (k, sum(&|r| r.delta[i].1)))
            .collect(),
        kendall_tau: sum(&|r| r.kendall_tau),
        n_pixels: reports.iter().map(|r| r.n_pixels).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig<f64> {
        ExperimentConfig {
            scene: SceneConfig {
                height: 32,
                width: 32,
                ..SceneConfig::default()
            },
            sparse_count: 150,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in [Protocol::NoisyCompletion, Protocol::Inpainting] {
            assert_eq!(p.to_string().parse::<Protocol>().unwrap(), p);
        }
        assert!("other".parse::<Protocol>().is_err());
    }

    #[test]
    fn bins() {
        assert_eq!(h2i_bin(0.05).unwrap(), Interval { lo: 0.01, hi: 0.1 });
        assert_eq!(h2i_bin(0.1).unwrap(), Interval { lo: 0.01, hi: 0.1 });
        assert_eq!(h2i_bin(0.45).unwrap(), Interval { lo: 0.4, hi: 0.5 });
        assert_eq!(h2i_bin(0.0).unwrap(), Interval { lo: 0.0, hi: 0.0 });
    }

    #[test]
    fn trials_run() {
        let cfg = small();
        let input = prepare_trial(Protocol::NoisyCompletion, 0.1, 4, &cfg).unwrap();
        assert_eq!(input.affected.count_ones(), 15);
        assert_eq!(input.eval_mask.count_ones(), 32 * 32);
        let r = run_trial(Protocol::NoisyCompletion, &input, &cfg, 4).unwrap();
        assert!(r.refined.rmse.is_finite() && r.baseline.rmse.is_finite());

        let input = prepare_trial(Protocol::Inpainting, 0.05, 4, &cfg).unwrap();
        let frac = input.eval_mask.coverage();
        assert!(frac > 0.01 && frac <= 0.1);
        let r = run_trial(Protocol::Inpainting, &input, &cfg, 4).unwrap();
        assert_eq!(r.refined.n_pixels, input.eval_mask.count_ones());
    }

    #[test]
    fn mean_of_reports() {
        let a = EvalReport {
            rmse: 1.0f64,
            delta: vec![(1.25, 0.5)],
            kendall_tau: 0.2,
            n_pixels: 3,
        };
        let b = EvalReport {
            rmse: 3.0,
            delta: vec![(1.25, 1.0)],
            kendall_tau: 0.4,
            n_pixels: 5,
        };
        let m = mean_report(&[a, b]).unwrap();
        assert_eq!((m.rmse, m.delta[0].1, m.n_pixels), (2.0, 0.75, 8));
        assert!((m.kendall_tau - 0.3).abs() < 1e-15);
        assert!(mean_report::<f64>(&[]).is_none());
    }
}
