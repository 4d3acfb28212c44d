use std::path::Path;
use std::process::Command;

use mcpinn::cli::read_csv;

const FORWARD: &str = "[run]\nseed = 3\n[problem]\nfamily = forward-laplacian\nd = 2\nalpha = 1.5\nhidden = 8, 8\n\
[train]\nepochs = 10\nbatch_size = 8\ntrace_every = 4\n[estimator]\nm = 4\n";

const INVERSE: &str = "[run]\nseed = 4\n[problem]\nfamily = inverse-ade\nd = 1\nhidden = 8, 8\n\
[train]\nepochs = 6\nbatch_size = 8\n[estimator]\nm = 3\nr0 = 0.3\n";

fn mcpinn(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join(format!("{sub}.ini"));
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mcpinn"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .args(extra)
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

#[test]
fn forward_train_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fwd");
    let (code, msg) = mcpinn(dir.path(), "train", FORWARD, &["--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{msg}");
    for f in ["loss_trace.csv", "checkpoint.txt", "manifest.json", "report.csv", "solution_grid.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let (header, rows) = read_csv(&out.join("loss_trace.csv")).unwrap();
    assert_eq!(header, ["epoch", "total", "equ", "g", "u", "lr", "alpha", "c"]);
    assert!(!rows.is_empty());
    let (_, grid) = read_csv(&out.join("solution_grid.csv")).unwrap();
    assert_eq!(grid.len(), 101 * 101);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["seed"], 3);
    // 8m + 1 queries per residual point
    assert_eq!(manifest["counters"]["queries_per_point"], 33.0);
    assert_eq!(manifest["counters"]["equation_queries"], 10 * 8 * 33);
}

#[test]
fn inverse_train_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(mcpinn(dir.path(), "train", INVERSE, &["--out", a.to_str().unwrap()]).0, 0);
    let (code, msg) = mcpinn(dir.path(), "train", INVERSE, &["--out", b.to_str().unwrap(), "--workers", "4"]);
    assert_eq!(code, 0, "{msg}");
    let (header, rows) = read_csv(&a.join("param_trace.csv")).unwrap();
    assert_eq!(header, ["epoch", "alpha", "gamma", "c", "v1"]);
    assert_eq!(rows.len(), 7);
    for f in ["loss_trace.csv", "param_trace.csv", "checkpoint.txt", "solution_grid.csv", "report.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn warm_start_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    assert_eq!(mcpinn(dir.path(), "train", FORWARD, &["--out", a.to_str().unwrap()]).0, 0);
    let ck = a.join("checkpoint.txt");
    let b = dir.path().join("b");
    let (code, msg) = mcpinn(dir.path(), "train", FORWARD, &["--out", b.to_str().unwrap(), "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(code, 0, "{msg}");
    let (code, msg) = mcpinn(dir.path(), "train", INVERSE, &["--out", b.to_str().unwrap(), "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(code, 2, "{msg}");
    assert!(msg.contains("checkpoint layout"));
}

#[test]
fn config_errors_exit_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    let (code, msg) = mcpinn(dir.path(), "train", "[run]\nseed = 1\n[problem]\nfamily = forward-laplacian\nalpha = 2.5\n", &["--out", o]);
    assert_eq!(code, 2);
    assert!(msg.contains("line 3"), "{msg}");
    let (code, msg) = mcpinn(dir.path(), "train", "[problem]\nfamily = forward-laplacian\n[train]\nepochs = many\n", &["--out", o, "--seed", "1"]);
    assert_eq!(code, 2);
    assert!(msg.contains("line 4"), "{msg}");
    // no seed anywhere
    let (code, msg) = mcpinn(dir.path(), "estimate", "[estimate]\ndraws = 10\n", &["--out", o]);
    assert_eq!(code, 2, "{msg}");
    // clap usage error
    let (code, _) = mcpinn(dir.path(), "train", FORWARD, &["--bogus"]);
    assert_eq!(code, 2);
}

#[test]
fn non_finite_loss_exits_1_with_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = FORWARD.replace("epochs = 10", "epochs = 10\nlr = 1e300");
    let (code, msg) = mcpinn(dir.path(), "train", &cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(code, 1, "{msg}");
    assert!(msg.contains("numerical failure"), "{msg}");
    let ck = mcpinn::net::load_checkpoint(&out.join("checkpoint.txt")).unwrap();
    assert!(ck.values.iter().all(|v| v.is_finite()));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("numerical failure"));
}

#[test]
fn oracle_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    let (code, msg) = mcpinn(dir.path(), "oracle", "[oracle]\nd = 1\nalpha = 1.5\npoints = -0.75; -0.5; 0; 0.25; 0.6\n", &["--out", o]);
    assert_eq!(code, 0, "{msg}");
    let (header, rows) = read_csv(&out.join("oracle.csv")).unwrap();
    assert_eq!(header, ["x1", "value", "error", "analytic"]);
    for r in &rows {
        assert!((r[1] - r[3]).abs() < 1e-6, "{r:?}");
    }
    assert_eq!(mcpinn(dir.path(), "oracle", "[oracle]\nd = 2\npoints =\n", &["--out", o]).0, 0);
    assert_eq!(std::fs::read_to_string(out.join("oracle.csv")).unwrap(), "x1,x2,value,error,analytic\n");
    let (code, msg) = mcpinn(dir.path(), "oracle", "[oracle]\nd = 2\npoints = 0.1, 0.2; 0.3, oops\n", &["--out", o]);
    assert_eq!(code, 2);
    assert!(msg.contains("row 2"), "{msg}");
    let (code, _) = mcpinn(dir.path(), "oracle", "[oracle]\nd = 4\npoints = 0, 0, 0, 0\n", &["--out", o]);
    assert_eq!(code, 2);
    let (code, msg) = mcpinn(dir.path(), "oracle", "[oracle]\noperator = caputo\ngamma = 0.5\npoints = 0.25; 1\n", &["--out", o]);
    assert_eq!(code, 0, "{msg}");
    let (header, rows) = read_csv(&out.join("oracle.csv")).unwrap();
    assert_eq!(header[0], "t");
    for r in &rows {
        assert!((r[1] - r[3]).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn estimate_sweep_is_unbiased() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = "[estimate]\nd = 1\nalpha = 1.5\npoint = 0\nm_values = 5, 10, 20, 40\ndraws = 20000\n";
    let (code, msg) = mcpinn(dir.path(), "estimate", cfg, &["--out", out.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(code, 0, "{msg}");
    let (header, rows) = read_csv(&out.join("estimate.csv")).unwrap();
    assert_eq!(header[6], "z");
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(r[6].abs() <= 4.0, "{r:?}");
        assert_eq!(r[7], 4.0 * r[0] + 1.0);
    }
}

#[test]
fn estimate_without_reference_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = "[estimate]\nd = 5\nfield = bump\nm_values = 2\ndraws = 100\n";
    let (code, msg) = mcpinn(dir.path(), "estimate", cfg, &["--out", out.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(code, 0, "{msg}");
    assert!(msg.contains("MC statistics only"));
    let text = std::fs::read_to_string(out.join("estimate.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",,,9,0"), "{text}");
}

#[test]
fn abc_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    let (code, msg) = mcpinn(dir.path(), "abc", "[abc]\ndraws = 300\ntolerance = 1e9\n", &["--out", o, "--seed", "2"]);
    assert_eq!(code, 0, "{msg}");
    let (header, rows) = read_csv(&out.join("posterior.csv")).unwrap();
    assert_eq!(header, ["alpha", "mu"]);
    assert_eq!(rows.len(), 300);
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"acceptance_rate\": 1.0"), "{manifest}");
    for f in ["density_alpha.csv", "density_mu.csv"] {
        let (_, dens) = read_csv(&out.join(f)).unwrap();
        let mass = mcpinn::abc::trapezoid(
            &dens.iter().map(|r| r[0]).collect::<Vec<_>>(),
            &dens.iter().map(|r| r[1]).collect::<Vec<_>>(),
        );
        assert!((mass - 1.0).abs() < 1e-3, "{f}: {mass}");
    }

    let (code, msg) = mcpinn(dir.path(), "abc", "[abc]\ndraws = 300\ntolerance = 0\n", &["--out", o, "--seed", "2"]);
    assert_eq!(code, 1);
    assert!(msg.contains("tolerance"), "{msg}");
    let (code, msg) = mcpinn(dir.path(), "abc", "[abc]\nmodel = surrogate\n", &["--out", o, "--seed", "2"]);
    assert_eq!(code, 2, "{msg}");
}
