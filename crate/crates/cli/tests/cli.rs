use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_depthforge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn depthforge")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "config.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn synth_is_deterministic_and_writes_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth", "--seeds", "0..2", "--dims", "24x32", "-o", d.to_str().unwrap()]);
    }
    let files = read_dir_bytes(&a);
    assert_eq!(files.len(), 7, "3 scene pairs and a manifest");
    assert_eq!(files, read_dir_bytes(&b));
    let manifest = fs::read_to_string(a.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 4);
    assert!(manifest.contains("2,scene_2.ppm,scene_2.pfm,24,32"));
    let cfg = fs::read_to_string(a.join("config.txt")).unwrap();
    assert!(cfg.contains("height = 24") && cfg.contains("seeds = 0..2"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let bad_dims = run(&["synth", "--dims", "0x0", "-o", &out]);
    assert_eq!(bad_dims.status.code(), Some(2));
    assert!(!bad_dims.stderr.is_empty());
    assert_eq!(run(&["synth", "--set", "tau=-1", "-o", &out]).status.code(), Some(2));
    assert_eq!(run(&["synth", "--set", "bogus=1", "-o", &out]).status.code(), Some(2));
    let missing = run(&["eval", "--pred", "missing.pfm", "--truth", "missing.pfm"]);
    assert_eq!(missing.status.code(), Some(3));
    let garbage = tmp.path().join("garbage.pfm");
    fs::write(&garbage, b"not a pfm").unwrap();
    let g = garbage.display().to_string();
    assert_eq!(run(&["eval", "--pred", &g, "--truth", &g]).status.code(), Some(3));
    let threads = bin()
        .env("DEPTHFORGE_THREADS", "zero")
        .args(["synth", "--seeds", "0", "-o", &out])
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# test\nheight = 20\nwidth = 20\neps = 0.05\n").unwrap();
    let out = tmp.path().join("o");
    ok(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "width=28",
        "--eps",
        "0.02",
        "--seeds",
        "5",
        "-o",
        out.to_str().unwrap(),
    ]);
    let resolved = fs::read_to_string(out.join("config.txt")).unwrap();
    for line in ["height = 20", "width = 28", "eps = 0.02", "seeds = 5"] {
        assert!(resolved.contains(line), "{line} missing from\n{resolved}");
    }
    // the resolved file reproduces the run
    let again = tmp.path().join("again");
    ok(&[
        "synth",
        "--config",
        out.join("config.txt").to_str().unwrap(),
        "-o",
        again.to_str().unwrap(),
    ]);
    assert_eq!(read_dir_bytes(&out), read_dir_bytes(&again));
}

#[test]
fn pipeline_outputs_and_stage_split() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let s = t.join("s");
    ok(&["synth", "--seeds", "3", "--dims", "24x24", "-o", s.to_str().unwrap()]);
    let c = t.join("c");
    ok(&[
        "corrupt",
        "--depth",
        &p(&s, "scene_3.pfm"),
        "--sparse-count",
        "120",
        "--seed",
        "1",
        "-o",
        c.to_str().unwrap(),
    ]);
    let (rgb, depth) = (p(&s, "scene_3.ppm"), p(&c, "corrupted.pfm"));
    let full = t.join("full");
    ok(&["pipeline", "--rgb", &rgb, "--depth", &depth, "--seed", "4", "-o", full.to_str().unwrap()]);
    for f in [
        "mu.pfm",
        "sigma2.pfm",
        "mask_sigma.pgm",
        "refined.pfm",
        "fit.csv",
        "diff_only.pfm",
        "steps.csv",
        "config.txt",
    ] {
        assert!(full.join(f).exists(), "{f}");
    }
    let resolved = fs::read_to_string(full.join("config.txt")).unwrap();
    for line in ["eps = 0.01", "n_samples = 10", "iterations = 6", "windows = 13,3"] {
        assert!(resolved.contains(line), "{line}");
    }

    let rerun = t.join("rerun");
    ok(&["pipeline", "--rgb", &rgb, "--depth", &depth, "--seed", "4", "-o", rerun.to_str().unwrap()]);
    assert_eq!(read_dir_bytes(&full), read_dir_bytes(&rerun));

    let est = t.join("est");
    ok(&["estimate", "--rgb", &rgb, "--depth", &depth, "--seed", "4", "-o", est.to_str().unwrap()]);
    assert_eq!(fs::read(est.join("mu.pfm")).unwrap(), fs::read(full.join("mu.pfm")).unwrap());
    let refined = t.join("refined");
    ok(&[
        "refine",
        "--rgb",
        &rgb,
        "--depth",
        &depth,
        "--mu",
        &p(&est, "mu.pfm"),
        "--sigma2",
        &p(&est, "sigma2.pfm"),
        "-o",
        refined.to_str().unwrap(),
    ]);
    assert!(refined.join("refined.pfm").exists());

    let diff = t.join("diff");
    ok(&[
        "pipeline",
        "--rgb",
        &rgb,
        "--depth",
        &depth,
        "--seed",
        "4",
        "--mode",
        "diff-only",
        "-o",
        diff.to_str().unwrap(),
    ]);
    assert!(!diff.join("refined.pfm").exists());
    assert_eq!(
        fs::read(diff.join("diff_only.pfm")).unwrap(),
        fs::read(full.join("diff_only.pfm")).unwrap()
    );

    let out = run(&[
        "eval",
        "--pred",
        &p(&full, "refined.pfm"),
        "--truth",
        &p(&s, "scene_3.pfm"),
        "--error-map",
        &p(t, "err/err.pgm"),
        "--error-range",
        "0,1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("run_id,protocol,condition,rmse,delta_1.25,tau,n_pixels,seed"));
    assert!(lines.next().unwrap().ends_with(",576,0"));
    assert!(t.join("err/err.pgm").exists());
}

#[test]
fn experiment_report_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    ok(&["experiment", "--seeds", "", "-o", empty.to_str().unwrap()]);
    let text = fs::read_to_string(empty.join("report.csv")).unwrap();
    assert_eq!(text, "run_id,protocol,condition,rmse,delta_1.25,tau,n_pixels,seed\n");

    let out = tmp.path().join("run");
    ok(&[
        "experiment",
        "--protocol",
        "inpainting",
        "--seeds",
        "0,1",
        "--set",
        "height=24",
        "--set",
        "width=24",
        "--set",
        "h2i=0.05",
        "-o",
        out.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 3 + 3);
    assert!(rows.iter().any(|r| r.starts_with("refined-s1,inpainting,0.05,")));
    assert!(rows.iter().any(|r| r.starts_with("baseline-mean,") && r.ends_with(',')));

    assert_eq!(
        run(&["experiment", "--protocol", "other", "-o", out.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn sweep_ablation_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sw");
    ok(&[
        "sweep",
        "--axis",
        "sigma2-ablation",
        "--seeds",
        "0",
        "--set",
        "height=24",
        "--set",
        "width=24",
        "--set",
        "sparse_count=150",
        "-o",
        out.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(text.contains("with-sigma2-s0,sigma2-ablation"));
    assert!(text.contains("without-sigma2-s0,sigma2-ablation"));
    assert!(out.join("refined_with_sigma2.pgm").exists());
}
