use std::path::Path;

use rayon::prelude::*;

use depthforge::config::parse_list;
use depthforge::depth::{valid_mask, BitMask, DepthMap, Grid, Interval, RgbImage};
use depthforge::experiment::{mean_report, prepare_trial, run_trial, Protocol, TrialInput};
use depthforge::io::{read_mask_pgm, read_pfm, read_pfm_grid, read_ppm, to_gray8, write_pgm, write_ppm};
use depthforge::metrics::{evaluate, EvalReport, CSV_HEADER};
use depthforge::pipeline::{diff_only, diff_only_from_stats, normalize, run_pipeline, PipelineConfig};
use depthforge::refine::{certainty_mask, refine, RefineOutput, ScaleShiftFit};
use depthforge::rng::derive_seed;
use depthforge::run::RunConfig;
use depthforge::stochastic::{estimate as estimate_stage1, EnsembleStats};
use depthforge::synth::{generate_scene, CorruptionMode, CorruptionSpec};
use depthforge::{Error, Result};

use crate::output::{ensure_parent, OutDir};

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let out = OutDir::create(cfg)?;
    let mut rows = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let scene = generate_scene::<f64>(seed, &cfg.scene)?;
        let (rgb, depth) = (format!("scene_{seed}.ppm"), format!("scene_{seed}.pfm"));
        write_ppm(&scene.rgb, out.path(&rgb))?;
        out.pfm(&depth, scene.depth_true.grid())?;
        rows.push(format!(
            "{seed},{rgb},{depth},{},{}",
            cfg.scene.height, cfg.scene.width
        ));
    }
    out.csv("manifest.csv", "seed,rgb,depth,height,width", &rows)
}

#[allow(clippy::too_many_arguments)]
pub fn corruption_spec(
    cfg: &RunConfig,
    mode: &str,
    noise_ratio: f64,
    sigma: Option<f64>,
    sparse_count: Option<usize>,
    h2i: &str,
    coverage: f64,
    seed: u64,
) -> Result<CorruptionSpec> {
    let range = match parse_list::<f64>(h2i)?.as_slice() {
        &[lo, hi] => Interval::new(lo, hi)?,
        &[x] => Interval::point(x),
        _ => return Err(Error::InvalidConfig(format!("--h2i {h2i:?}: expected lo,hi"))),
    };
    let spec = CorruptionSpec {
        mode: mode.parse::<CorruptionMode>()?,
        noise_ratio,
        noise_sigma: sigma,
        sparse_count: sparse_count.unwrap_or(cfg.sparse_count),
        h2i_range: range,
        coverage,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn corrupt(cfg: &RunConfig, depth: &Path, spec: &CorruptionSpec) -> Result<()> {
    let truth = read_pfm::<f64>(depth)?;
    let c = spec.apply(&truth)?;
    let out = OutDir::create(cfg)?;
    out.pfm("corrupted.pfm", c.depth.grid())?;
    out.mask("affected.pgm", &c.affected)
}

fn load_inputs(rgb: &Path, depth: &Path) -> Result<(RgbImage<f64>, DepthMap<f64>)> {
    let rgb = read_ppm::<f64>(rgb)?;
    let depth = read_pfm::<f64>(depth)?;
    rgb.grid().check_dims(depth.dims())?;
    Ok((rgb, depth))
}

fn write_stage1(out: &OutDir, stats: &EnsembleStats<f64>, eps: f64) -> Result<()> {
    out.pfm("mu.pfm", &stats.mu_hat)?;
    out.pfm("sigma2.pfm", &stats.sigma2_hat)?;
    out.mask(
        "mask_sigma.pgm",
        &certainty_mask(&stats.sigma2_hat, eps),
    )?;
    out.panel("sigma2_panel.pgm", &stats.sigma2_hat, None)
}

fn write_stage2(out: &OutDir, r: &RefineOutput<f64>) -> Result<()> {
    out.pfm("refined.pfm", r.depth.grid())?;
    out.mask("mask_final.pgm", &r.mask)?;
    out.mask("reliable.pgm", &r.reliable)?;
    out.csv("fit.csv", FIT_HEADER, &fit_row(&r.fit))?;
    let rows: Vec<String> = r
        .filled_per_step
        .iter()
        .enumerate()
        .scan(r.reliable.count_ones(), |valid, (step, &n)| {
            *valid += n;
            Some(format!("{step},{n},{valid}"))
        })
        .collect();
    out.csv("steps.csv", "step,filled,valid", &rows)
}

pub fn estimate(cfg: &RunConfig, rgb: &Path, depth: &Path, seed: u64) -> Result<()> {
    cfg.pipeline.validate()?;
    let (rgb, depth) = load_inputs(rgb, depth)?;
    let (nd, _) = normalize(&depth, cfg.pipeline.quantiles)?;
    let est = estimate_stage1(&rgb, &nd.values, &nd.mask, &cfg.pipeline.estimate, seed)?;
    let out = OutDir::create(cfg)?;
    write_stage1(&out, &est.stats, cfg.pipeline.refine.eps)
}

fn stored_stats(mu: &Path, sigma2: &Path, n_samples: usize) -> Result<EnsembleStats<f64>> {
    let mu_hat = read_pfm_grid::<f64>(mu)?;
    let sigma2_hat = read_pfm_grid::<f64>(sigma2)?;
    sigma2_hat.check_dims(mu_hat.dims())?;
    Ok(EnsembleStats {
        mu_hat,
        sigma2_hat,
        n_samples,
    })
}

pub fn refine_stage(cfg: &RunConfig, rgb: &Path, depth: &Path, mu: &Path, sigma2: &Path) -> Result<()> {
    let (rgb, depth) = load_inputs(rgb, depth)?;
    let stats = stored_stats(mu, sigma2, cfg.pipeline.estimate.n_samples)?;
    stats.mu_hat.check_dims(depth.dims())?;
    let (nd, norm) = normalize(&depth, cfg.pipeline.quantiles)?;
    let r = refine(&nd.values, &nd.mask, &stats, &rgb, &norm, &cfg.pipeline.refine)?;
    let out = OutDir::create(cfg)?;
    write_stage2(&out, &r)
}

fn fit_row(fit: &ScaleShiftFit<f64>) -> [String; 1] {
    [format!("{},{},{},{}", fit.a, fit.b, fit.residual_rms, fit.support_count)]
}

const FIT_HEADER: &str = "a,b,residual_rms,support_count";

/// Both stages and the diff-only reconstruction; `diff_only_mode` skips the
/// propagation stage.
pub fn pipeline(cfg: &RunConfig, rgb: &Path, depth: &Path, seed: u64, diff_only_mode: bool) -> Result<()> {
    let (rgb, depth) = load_inputs(rgb, depth)?;
    if diff_only_mode {
        cfg.pipeline.validate()?;
        let (nd, _) = normalize(&depth, cfg.pipeline.quantiles)?;
        let est = estimate_stage1(&rgb, &nd.values, &nd.mask, &cfg.pipeline.estimate, seed)?;
        let d = diff_only_from_stats(&rgb, &depth, &nd, &est.stats, &cfg.pipeline, seed)?;
        let out = OutDir::create(cfg)?;
        write_stage1(&out, &est.stats, cfg.pipeline.refine.eps)?;
        out.pfm("diff_only.pfm", d.depth.grid())?;
        return out.csv("fit.csv", FIT_HEADER, &fit_row(&d.fit));
    }
    let res = run_pipeline(&rgb, &depth, &cfg.pipeline, seed)?;
    let d = diff_only(&rgb, &depth, &res, &cfg.pipeline, seed)?;
    let out = OutDir::create(cfg)?;
    write_stage1(&out, &res.stats, cfg.pipeline.refine.eps)?;
    out.pfm("diff_only.pfm", d.depth.grid())?;
    write_stage2(&out, &res.refined)
}

pub fn eval(
    cfg: &RunConfig,
    pred: &Path,
    truth: &Path,
    mask: Option<&Path>,
    error_map: Option<&Path>,
    error_range: Option<&str>,
) -> Result<()> {
    let pred = read_pfm::<f64>(pred)?;
    let truth = read_pfm::<f64>(truth)?;
    let m = match mask {
        Some(p) => read_mask_pgm(p)?.and(&valid_mask(&truth))?,
        None => valid_mask(&truth),
    };
    let report = evaluate(&pred, &truth, &m, &cfg.ks)?;
    println!("{CSV_HEADER}");
    println!("{}", report.csv_row("eval", "eval", 0.0, 0));
    if let Some(path) = error_map {
        let range = match error_range {
            None => None,
            Some(r) => match parse_list::<f64>(r)?.as_slice() {
                &[lo, hi] if lo < hi => Some((lo, hi)),
                _ => return Err(Error::InvalidConfig(format!("--error-range {r:?}: expected lo,hi"))),
            },
        };
        let err = pred
            .grid()
            .zip_map(truth.grid(), |a, b| (a - b).abs())?
            .zip_map(&m, |e, k| if k { e } else { 0.0 })?;
        ensure_parent(path)?;
        write_pgm(&to_gray8(&err, range, 1.0), path)?;
    }
    Ok(())
}

/// Report rows of one trial: refined, diff-only and the protocol baseline.
struct TrialRows {
    seed: u64,
    condition: f64,
    reports: [EvalReport<f64>; 3],
}

const METHODS: [&str; 3] = ["refined", "diff-only", "baseline"];

/// Mean over `reports` as a report row with an empty seed column.
fn aggregate_row(reports: &[EvalReport<f64>], run_id: &str, protocol: &str, condition: f64) -> Option<String> {
    let row = mean_report(reports)?.csv_row(run_id, protocol, condition, 0);
    let cut = row.rfind(',').unwrap_or(row.len());
    Some(format!("{},", &row[..cut]))
}

fn aggregate_rows(protocol: &str, condition: f64, trials: &[TrialRows]) -> Vec<String> {
    (0..METHODS.len())
        .filter_map(|k| {
            let reports: Vec<EvalReport<f64>> = trials.iter().map(|t| t.reports[k].clone()).collect();
            aggregate_row(&reports, &format!("{}-mean", METHODS[k]), protocol, condition)
        })
        .collect()
}

pub fn experiment(cfg: &RunConfig, protocol: Protocol) -> Result<()> {
    let out = OutDir::create(cfg)?;
    let exp = cfg.experiment();
    let conditions = match protocol {
        Protocol::NoisyCompletion => cfg.noise_ratios.clone(),
        Protocol::Inpainting => cfg.h2i.clone(),
    };
    let name = protocol.to_string();
    let mut rows = Vec::new();
    let mut failure = None;
    for &condition in &conditions {
        let results: Vec<Result<TrialRows>> = cfg
            .seeds
            .par_iter()
            .map(|&seed| {
                let input = prepare_trial(protocol, condition, seed, &exp)?;
                let r = run_trial(protocol, &input, &exp, seed)?;
                Ok(TrialRows {
                    seed,
                    condition,
                    reports: [r.refined, r.diff_only, r.baseline],
                })
            })
            .collect();
        let mut ok = Vec::new();
        for r in results {
            match r {
                Ok(t) => ok.push(t),
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
        for t in &ok {
            for (k, rep) in t.reports.iter().enumerate() {
                rows.push(rep.csv_row(&format!("{}-s{}", METHODS[k], t.seed), &name, t.condition, t.seed));
            }
        }
        rows.extend(aggregate_rows(&name, condition, &ok));
        if failure.is_some() {
            break;
        }
    }
    out.csv("report.csv", CSV_HEADER, &rows)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn sweep_suite(cfg: &RunConfig, noise_ratio: f64) -> Result<Vec<(u64, TrialInput<f64>)>> {
    let exp = cfg.experiment();
    cfg.seeds
        .iter()
        .map(|&s| Ok((s, prepare_trial(Protocol::NoisyCompletion, noise_ratio, s, &exp)?)))
        .collect()
}

fn score(
    d: &DepthMap<f64>,
    input: &TrialInput<f64>,
    ks: &[f64],
) -> Result<EvalReport<f64>> {
    evaluate(d, &input.scene.depth_true, &input.eval_mask, ks)
}

fn masked_depth_panel(depth: &DepthMap<f64>, mask: &BitMask) -> Result<Grid<f64>> {
    depth.grid().zip_map(mask, |v, k| if k { v } else { 0.0 })
}

pub const N_SWEEP: [usize; 6] = [1, 2, 5, 10, 20, 50];
pub const EPS_SWEEP: [f64; 7] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1];

pub fn sweep_n_samples(cfg: &RunConfig, noise_ratio: f64) -> Result<()> {
    let out = OutDir::create(cfg)?;
    let suite = sweep_suite(cfg, noise_ratio)?;
    let mut rows = Vec::new();
    for n in N_SWEEP {
        let mut pc: PipelineConfig<f64> = cfg.pipeline.clone();
        pc.estimate.n_samples = n;
        let mut reports = Vec::new();
        for (i, (seed, input)) in suite.iter().enumerate() {
            let res = run_pipeline(&input.scene.rgb, &input.observed, &pc, derive_seed(*seed, 2))?;
            let rep = score(&res.refined.depth, input, &cfg.ks)?;
            rows.push(rep.csv_row(&format!("n{n}-s{seed}"), "n-samples", n as f64, *seed));
            if i == 0 {
                out.panel(&format!("sigma2_n{n}.pgm"), &res.stats.sigma2_hat, None)?;
                let m = &res.refined.reliable;
                out.panel(&format!("masked_n{n}.pgm"), &masked_depth_panel(&input.observed, m)?, None)?;
            }
            reports.push(rep);
        }
        rows.extend(aggregate_row(&reports, &format!("n{n}-mean"), "n-samples", n as f64));
    }
    out.csv("sweep.csv", CSV_HEADER, &rows)
}

pub fn sweep_epsilon(cfg: &RunConfig, noise_ratio: f64) -> Result<()> {
    let out = OutDir::create(cfg)?;
    let suite = sweep_suite(cfg, noise_ratio)?;
    let mut rows = Vec::new();
    let mut per_eps: Vec<Vec<EvalReport<f64>>> = vec![Vec::new(); EPS_SWEEP.len()];
    for (i, (seed, input)) in suite.iter().enumerate() {
        let (nd, norm) = normalize(&input.observed, cfg.pipeline.quantiles)?;
        let est = estimate_stage1(
            &input.scene.rgb,
            &nd.values,
            &nd.mask,
            &cfg.pipeline.estimate,
            derive_seed(*seed, 2),
        )?;
        for (k, &eps) in EPS_SWEEP.iter().enumerate() {
            let mut rc = cfg.pipeline.refine.clone();
            rc.eps = eps;
            let r = match refine(&nd.values, &nd.mask, &est.stats, &input.scene.rgb, &norm, &rc) {
                Ok(r) => r,
                // nothing certain at this threshold: no row for this seed
                Err(Error::EmptyReliableSet) | Err(Error::SingularFit(_)) => continue,
                Err(e) => return Err(e),
            };
            let rep = score(&r.depth, input, &cfg.ks)?;
            rows.push(rep.csv_row(&format!("eps{eps:e}-s{seed}"), "epsilon", eps, *seed));
            if i == 0 {
                out.panel(
                    &format!("masked_eps{eps:e}.pgm"),
                    &masked_depth_panel(&input.observed, &r.reliable)?,
                    None,
                )?;
            }
            per_eps[k].push(rep);
        }
    }
    for (k, &eps) in EPS_SWEEP.iter().enumerate() {
        rows.extend(aggregate_row(&per_eps[k], &format!("eps{eps:e}-mean"), "epsilon", eps));
    }
    out.csv("sweep.csv", CSV_HEADER, &rows)
}

pub fn sweep_ablation(cfg: &RunConfig, noise_ratio: f64) -> Result<()> {
    let out = OutDir::create(cfg)?;
    let suite = sweep_suite(cfg, noise_ratio)?;
    let mut blind = cfg.pipeline.clone();
    blind.refine.use_sigma2 = false;
    let mut rows = Vec::new();
    let (mut with_all, mut without_all) = (Vec::new(), Vec::new());
    for (i, (seed, input)) in suite.iter().enumerate() {
        let s = derive_seed(*seed, 2);
        let with = run_pipeline(&input.scene.rgb, &input.observed, &cfg.pipeline, s)?;
        let without = run_pipeline(&input.scene.rgb, &input.observed, &blind, s)?;
        let a = score(&with.refined.depth, input, &cfg.ks)?;
        let b = score(&without.refined.depth, input, &cfg.ks)?;
        rows.push(a.csv_row(&format!("with-sigma2-s{seed}"), "sigma2-ablation", noise_ratio, *seed));
        rows.push(b.csv_row(&format!("without-sigma2-s{seed}"), "sigma2-ablation", noise_ratio, *seed));
        if i == 0 {
            let range = input.scene.depth_true.valid_range();
            out.panel("refined_with_sigma2.pgm", with.refined.depth.grid(), range)?;
            out.panel("refined_without_sigma2.pgm", without.refined.depth.grid(), range)?;
        }
        with_all.push(a);
        without_all.push(b);
    }
    for (name, reps) in [("with-sigma2", &with_all), ("without-sigma2", &without_all)] {
        rows.extend(aggregate_row(reps, &format!("{name}-mean"), "sigma2-ablation", noise_ratio));
    }
    out.csv("sweep.csv", CSV_HEADER, &rows)
}
