//! Prints the synthetic-suite statistics used to choose default parameters.
//!
//! Usage: `cargo run --release --example calibrate -- [key=value ...]`
//! with keys tau, lambda, beta, nu, min_scale, floor, gamma, bandwidth,
//! anchor, seeds, what (detect,noisy,inpaint,nsweep,ablation).

use std::collections::HashMap;
use std::time::Instant;

use depthforge::experiment::{prepare_trial, run_trial, ExperimentConfig, Protocol};
use depthforge::pipeline::run_pipeline;
use depthforge::refine::certainty_mask;
use depthforge::rng::derive_seed;
use depthforge::stochastic::estimate;

fn main() {
    let args: HashMap<String, String> = std::env::args()
        .skip(1)
        .filter_map(|a| a.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let get = |k: &str, d: f64| args.get(k).map(|v| v.parse().unwrap()).unwrap_or(d);
    let mut cfg = ExperimentConfig::<f64>::default();
    let g = &mut cfg.pipeline.estimate.gmrf;
    g.tau = get("tau", g.tau);
    g.lambda = get("lambda", g.lambda);
    g.beta = get("beta", g.beta);
    g.nu = get("nu", g.nu);
    g.min_robust_scale = get("min_scale", g.min_robust_scale);
    g.edge_floor = get("floor", g.edge_floor);
    if let Some(v) = args.get("scale") {
        g.robust_scale = Some(v.parse().unwrap());
    }
    cfg.pipeline.estimate.irls.leverage = get("lev", 1.0) != 0.0;
    let r = &mut cfg.pipeline.refine;
    r.gamma_max = get("gamma", r.gamma_max);
    r.bandwidth = get("bandwidth", r.bandwidth);
    r.anchor = get("anchor", if r.anchor { 1.0 } else { 0.0 }) != 0.0;
    r.open_radius = get("open", r.open_radius as f64) as usize;
    r.eps = get("eps", r.eps);
    cfg.pipeline.estimate.irls.max_iters = get("irls", 10.0) as usize;
    cfg.pipeline.estimate.n_samples = get("n", 10.0) as usize;
    cfg.noise_sigma_frac = get("sigma_frac", cfg.noise_sigma_frac);
    let seeds = get("seeds", 20.0) as u64;
    let what = args.get("what").cloned().unwrap_or("detect,noisy,inpaint,nsweep,ablation".into());

    if what.contains("detect") {
        let t = Instant::now();
        let mut c3 = cfg.clone();
        c3.noise_sigma_frac = 0.3;
        let (mut hit, mut bad, mut fp, mut clean) = (0, 0, 0, 0);
        for s in 0..seeds {
            let input = prepare_trial(Protocol::NoisyCompletion, 0.1, s, &c3).unwrap();
            let (nd, norm) = depthforge::depth::normalize_depth(&input.observed).unwrap();
            let _ = norm;
            let est = estimate(&input.scene.rgb, &nd.values, &nd.mask, &c3.pipeline.estimate, derive_seed(s, 2)).unwrap();
            let cert = certainty_mask(&est.stats.sigma2_hat, c3.pipeline.refine.eps);
            let (mut h1, mut b1, mut f1, mut c1) = (0, 0, 0, 0);
            for i in 0..cert.len() {
                if !nd.mask.data()[i] {
                    continue;
                }
                if input.affected.data()[i] {
                    b1 += 1;
                    h1 += (!cert.data()[i]) as usize;
                } else {
                    c1 += 1;
                    f1 += (!cert.data()[i]) as usize;
                }
            }
            println!("detect seed {s}: {h1}/{b1} flagged, fp {f1}/{c1}");
            hit += h1;
            bad += b1;
            fp += f1;
            clean += c1;
        }
        println!(
            "DETECT rate {:.3} fp {:.3} ({:.1}s)",
            hit as f64 / bad as f64,
            fp as f64 / clean as f64,
            t.elapsed().as_secs_f64()
        );
    }

    if what.contains("noisy") {
        let t = Instant::now();
        let ratios: Vec<f64> = args
            .get("ratios")
            .map(|v| v.split(',').map(|x| x.parse().unwrap()).collect())
            .unwrap_or(vec![0.05, 0.10, 0.20]);
        for ratio in ratios {
            let (mut rr, mut rb, mut rd) = (0.0, 0.0, 0.0);
            for s in 0..seeds {
                let input = prepare_trial(Protocol::NoisyCompletion, ratio, s, &cfg).unwrap();
                let res = run_trial(Protocol::NoisyCompletion, &input, &cfg, s).unwrap();
                rr += res.refined.rmse;
                rb += res.baseline.rmse;
                rd += res.diff_only.rmse;
                if args.contains_key("verbose") {
                    let o = &res.output.refined;
                    println!(
                        "  seed {s}: observed {} missed {} certain {} reliable {} refined {:.4} raw {:.4}",
                        input.observed.valid_count(),
                        (0..o.reliable.len()).filter(|&i| o.reliable.data()[i] && input.affected.data()[i]).count(),
                        o.certainty.count_ones(),
                        o.reliable.count_ones(),
                        res.refined.rmse,
                        res.baseline.rmse
                    );
                }
            }
            let n = seeds as f64;
            println!(
                "NOISY ratio {ratio}: refined {:.4} raw {:.4} diff-only {:.4} ratio {:.3}",
                rr / n,
                rb / n,
                rd / n,
                rr / rb
            );
        }
        println!("noisy took {:.1}s", t.elapsed().as_secs_f64());
    }

    if what.contains("inpaint") {
        let (mut rr, mut rb, mut rd) = (0.0, 0.0, 0.0);
        for s in 0..seeds {
            let input = prepare_trial(Protocol::Inpainting, 0.05, s, &cfg).unwrap();
            let res = run_trial(Protocol::Inpainting, &input, &cfg, s).unwrap();
            rr += res.refined.rmse;
            rb += res.baseline.rmse;
            rd += res.diff_only.rmse;
        }
        let n = seeds as f64;
        println!(
            "INPAINT refined {:.4} prior-only {:.4} diff-only {:.4} ratio {:.3}",
            rr / n,
            rb / n,
            rd / n,
            rr / rb
        );
    }

    if what.contains("nsweep") {
        for n_samples in [1, 2, 5, 10, 20, 50] {
            let mut c = cfg.clone();
            c.pipeline.estimate.n_samples = n_samples;
            let mut rr = 0.0;
            for s in 0..seeds {
                let input = prepare_trial(Protocol::NoisyCompletion, 0.1, s, &c).unwrap();
                let out = run_pipeline(&input.scene.rgb, &input.observed, &c.pipeline, derive_seed(s, 2)).unwrap();
                rr += depthforge::metrics::rmse(&out.refined.depth, &input.scene.depth_true, &input.eval_mask).unwrap();
            }
            println!("NSWEEP N={n_samples}: rmse {:.4}", rr / seeds as f64);
        }
    }

    if what.contains("ablation") {
        let mut wins = 0;
        for s in 0..seeds {
            let input = prepare_trial(Protocol::NoisyCompletion, 0.1, s, &cfg).unwrap();
            let with = run_pipeline(&input.scene.rgb, &input.observed, &cfg.pipeline, derive_seed(s, 2)).unwrap();
            let mut blind = cfg.pipeline.clone();
            blind.refine.use_sigma2 = false;
            let without = run_pipeline(&input.scene.rgb, &input.observed, &blind, derive_seed(s, 2)).unwrap();
            let a = depthforge::metrics::rmse(&with.refined.depth, &input.scene.depth_true, &input.eval_mask).unwrap();
            let b = depthforge::metrics::rmse(&without.refined.depth, &input.scene.depth_true, &input.eval_mask).unwrap();
            wins += (a <= b) as usize;
            println!("ABLATION seed {s}: with {a:.4} without {b:.4}");
        }
        println!("ABLATION wins {wins}/{seeds}");
    }
}
