//! Resolved run configuration: every tunable of a command-line run, with
//! round-trip serialization to the `key = value` format.

use std::path::PathBuf;

use crate::config::{format_list, parse_list, KeyValues};
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, H2I_BINS, NOISE_RATIOS};
use crate::pipeline::PipelineConfig;
use crate::synth::SceneConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub pipeline: PipelineConfig<f64>,
    pub sparse_count: usize,
    pub noise_ratios: Vec<f64>,
    /// Outlier standard deviation as a fraction of the scene depth range.
    pub noise_sigma_frac: f64,
    /// Inpainting conditions; each selects the H2I bin containing it.
    pub h2i: Vec<f64>,
    pub seeds: Vec<u64>,
    pub ks: Vec<f64>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let exp = ExperimentConfig::<f64>::default();
        Self {
            scene: exp.scene,
            pipeline: exp.pipeline,
            sparse_count: exp.sparse_count,
            noise_ratios: NOISE_RATIOS.to_vec(),
            noise_sigma_frac: exp.noise_sigma_frac,
            h2i: H2I_BINS.iter().map(|&(lo, hi)| ((lo + hi) * 500.0).round() / 1000.0).collect(),
            seeds: (0..20).collect(),
            ks: exp.ks,
            out_dir: PathBuf::from("out"),
        }
    }
}

const RUN_KEYS: [&str; 29] = [
    "eps",
    "n_samples",
    "iterations",
    "windows",
    "lambda",
    "beta",
    "tau",
    "nu",
    "robust_scale",
    "min_robust_scale",
    "edge_floor",
    "irls_iters",
    "irls_tol",
    "leverage",
    "open_radius",
    "bandwidth",
    "gamma_max",
    "use_sigma2",
    "anchor",
    "quantiles",
    "sparse_count",
    "noise_ratios",
    "noise_sigma_frac",
    "h2i",
    "seeds",
    "ks",
    "out_dir",
    "solver_tol",
    "solver_max_iters",
];

/// Parses a seed list: `a..b` (inclusive), `a,b,c`, or empty for none.
pub fn parse_seeds(raw: &str) -> Result<Vec<u64>> {
    let raw = raw.trim();
    if let Some((a, b)) = raw.split_once("..") {
        let bad = || Error::InvalidConfig(format!("bad seed range {raw:?}"));
        let lo: u64 = a.trim().parse().map_err(|_| bad())?;
        let hi: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    parse_list(raw)
}

fn format_seeds(seeds: &[u64]) -> String {
    let contiguous = seeds.len() > 2 && seeds.windows(2).all(|w| w[1] == w[0] + 1);
    if contiguous {
        format!("{}..{}", seeds[0], seeds[seeds.len() - 1])
    } else {
        format_list(seeds)
    }
}

impl RunConfig {
    pub fn keys() -> Vec<&'static str> {
        RUN_KEYS.iter().chain(SceneConfig::KEYS.iter()).copied().collect()
    }

    pub fn experiment(&self) -> ExperimentConfig<f64> {
        ExperimentConfig {
            scene: self.scene.clone(),
            pipeline: self.pipeline.clone(),
            sparse_count: self.sparse_count,
            noise_sigma_frac: self.noise_sigma_frac,
            ks: self.ks.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.pipeline.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.sparse_count == 0 {
            return bad("sparse_count must be >= 1".into());
        }
        if self.noise_ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad(format!("noise ratios {:?} must lie in [0, 1]", self.noise_ratios));
        }
        if !(self.noise_sigma_frac >= 0.0 && self.noise_sigma_frac.is_finite()) {
            return bad(format!("noise_sigma_frac {} must be >= 0", self.noise_sigma_frac));
        }
        if self.h2i.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return bad(format!("h2i conditions {:?} must lie in (0, 1)", self.h2i));
        }
        if self.ks.iter().any(|k| !(*k > 1.0)) {
            return bad(format!("delta thresholds {:?} must exceed 1", self.ks));
        }
        if let Some((lo, hi)) = self.pipeline.quantiles {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return bad(format!("quantiles ({lo}, {hi}) must satisfy 0 <= lo < hi <= 1"));
            }
        }
        Ok(())
    }

    /// Defaults overridden by the keys present in `kv`; unknown keys are
    /// rejected.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        kv.reject_unknown(&Self::keys())?;
        let mut cfg = Self {
            scene: SceneConfig::from_key_values(kv)?,
            ..Self::default()
        };
        let p = &mut cfg.pipeline;
        let r = &mut p.refine;
        kv.read_into("eps", &mut r.eps)?;
        kv.read_into("iterations", &mut r.iterations)?;
        if let Some(w) = kv.get_str("windows") {
            r.windows = parse_list(w)?;
        }
        kv.read_into("open_radius", &mut r.open_radius)?;
        kv.read_into("bandwidth", &mut r.bandwidth)?;
        kv.read_into("gamma_max", &mut r.gamma_max)?;
        kv.read_into("use_sigma2", &mut r.use_sigma2)?;
        kv.read_into("anchor", &mut r.anchor)?;

        let e = &mut p.estimate;
        kv.read_into("n_samples", &mut e.n_samples)?;
        kv.read_into("lambda", &mut e.gmrf.lambda)?;
        kv.read_into("beta", &mut e.gmrf.beta)?;
        kv.read_into("tau", &mut e.gmrf.tau)?;
        kv.read_into("nu", &mut e.gmrf.nu)?;
        match kv.get_str("robust_scale") {
            None => {}
            Some("auto") | Some("") => e.gmrf.robust_scale = None,
            Some(_) => e.gmrf.robust_scale = kv.get("robust_scale")?,
        }
        kv.read_into("min_robust_scale", &mut e.gmrf.min_robust_scale)?;
        kv.read_into("edge_floor", &mut e.gmrf.edge_floor)?;
        kv.read_into("irls_iters", &mut e.irls.max_iters)?;
        kv.read_into("irls_tol", &mut e.irls.tol)?;
        kv.read_into("leverage", &mut e.irls.leverage)?;
        kv.read_into("solver_tol", &mut e.irls.solver.tol)?;
        kv.read_into("solver_max_iters", &mut e.irls.solver.max_iters)?;

        match kv.get_str("quantiles") {
            None => {}
            Some("none") | Some("") => p.quantiles = None,
            Some(q) => match parse_list::<f64>(q)?.as_slice() {
                &[lo, hi] => p.quantiles = Some((lo, hi)),
                _ => return Err(Error::InvalidConfig(format!("quantiles {q:?}: expected lo,hi"))),
            },
        }

        kv.read_into("sparse_count", &mut cfg.sparse_count)?;
        kv.read_into("noise_sigma_frac", &mut cfg.noise_sigma_frac)?;
        if let Some(v) = kv.get_str("noise_ratios") {
            cfg.noise_ratios = parse_list(v)?;
        }
        if let Some(v) = kv.get_str("h2i") {
            cfg.h2i = parse_list(v)?;
        }
        if let Some(v) = kv.get_str("seeds") {
            cfg.seeds = parse_seeds(v)?;
        }
        if let Some(v) = kv.get_str("ks") {
            cfg.ks = parse_list(v)?;
        }
        if let Some(v) = kv.get_str("out_dir") {
            cfg.out_dir = PathBuf::from(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = self.scene.to_key_values();
        let r = &self.pipeline.refine;
        kv.set("eps", r.eps);
        kv.set("iterations", r.iterations);
        kv.set("windows", format_list(&r.windows));
        kv.set("open_radius", r.open_radius);
        kv.set("bandwidth", r.bandwidth);
        kv.set("gamma_max", r.gamma_max);
        kv.set("use_sigma2", r.use_sigma2);
        kv.set("anchor", r.anchor);
        let e = &self.pipeline.estimate;
        kv.set("n_samples", e.n_samples);
        kv.set("lambda", e.gmrf.lambda);
        kv.set("beta", e.gmrf.beta);
        kv.set("tau", e.gmrf.tau);
        kv.set("nu", e.gmrf.nu);
        match e.gmrf.robust_scale {
            Some(s) => kv.set("robust_scale", s),
            None => kv.set("robust_scale", "auto"),
        }
        kv.set("min_robust_scale", e.gmrf.min_robust_scale);
        kv.set("edge_floor", e.gmrf.edge_floor);
        kv.set("irls_iters", e.irls.max_iters);
        kv.set("irls_tol", e.irls.tol);
        kv.set("leverage", e.irls.leverage);
        kv.set("solver_tol", e.irls.solver.tol);
        kv.set("solver_max_iters", e.irls.solver.max_iters);
        match self.pipeline.quantiles {
            Some((lo, hi)) => kv.set("quantiles", format!("{lo},{hi}")),
            None => kv.set("quantiles", "none"),
        }
        kv.set("sparse_count", self.sparse_count);
        kv.set("noise_ratios", format_list(&self.noise_ratios));
        kv.set("noise_sigma_frac", self.noise_sigma_frac);
        kv.set("h2i", format_list(&self.h2i));
        kv.set("seeds", format_seeds(&self.seeds));
        kv.set("ks", format_list(&self.ks));
        kv.set("out_dir", self.out_dir.display());
        kv
    }
}
