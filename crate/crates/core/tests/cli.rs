use std::fs;
use std::process::Command;

use bayesseg::harness::{Dataset, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bayesseg"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &std::path::Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::example_fixed();
    cfg.n = 9;
    cfg.replications = 1;
    cfg.methods = vec!["sEM".into(), "ICM".into()];
    cfg.grid.truncate(1);
    cfg.grid[0].precisions = vec![10.0];
    let path = dir.join("cfg.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    path
}

#[test]
fn config_output_parses() {
    for example in ["fixed", "nix"] {
        let text = run_ok(bin().args(["config", example]));
        ExperimentConfig::from_toml(&text).unwrap();
    }
}

#[test]
fn generate_then_oracle_then_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let data = dir.path().join("data.txt");
    run_ok(bin().arg("generate").arg("--config").arg(&cfg).arg("--out").arg(&data));
    let parsed = Dataset::parse(&fs::read_to_string(&data).unwrap()).unwrap();
    assert_eq!(parsed.obs.len(), 9);

    let oracle = run_ok(bin().arg("oracle").arg("--config").arg(&cfg).arg("--dataset").arg(&data).args(["--precision", "10"]));
    assert!(oracle.starts_with("ln p(x, y) = -"), "{oracle}");
    assert_eq!(oracle.lines().nth(1).unwrap().split_whitespace().count(), 2 + 9);

    let cluster = run_ok(
        bin().arg("cluster").arg("--dataset").arg(&data).args(["--xi=-0.7,0,0.7,1.4", "--kappa0", "1", "--tau0-sq", "0.25", "--rule", "em"]),
    );
    assert!(cluster.contains("sizes = ["), "{cluster}");
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    run_ok(bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out));
    let t1 = fs::read_to_string(out.join("table1.csv")).unwrap();
    assert!(t1.starts_with("dataset,Q,M,method,best_lnp,distinct_outputs\n"));
    assert_eq!(t1.lines().count(), 3);
    let report = run_ok(bin().arg("report").arg("--dir").arg(&out));
    assert!(report.contains("== table3.csv"));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "n = 3\n").unwrap();
    let out = bin().arg("run").arg("--config").arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}
