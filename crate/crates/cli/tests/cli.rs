use std::path::Path;
use std::process::{Command, Output};

use passage::density_kernel::bridge_survival;
use passage::increments::make_gaussian;
use passage::{BoundarySequence, GridConfig};

fn passage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_passage")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows of a CSV with its comment line and header removed.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(2).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(text: &str, name: &str) -> Vec<String> {
    let header: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows(text).into_iter().map(|r| r[idx].clone()).collect()
}

#[test]
fn oracle_prints_the_kernel_value() {
    let o = passage(&["oracle", "--model", "gaussian", "--boundary", "const:-1", "--n", "400", "--k", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let p: f64 = column(&text, "probability")[0].parse().unwrap();
    let b = BoundarySequence::constant(-1.0).unwrap();
    let want = bridge_survival(&make_gaussian(), &b, 400, 200, &GridConfig::default()).unwrap().probability;
    assert_eq!(p, want);
}

#[test]
fn identities_pass() {
    let o = passage(&["identities"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let worst = column(&text, "rel_error").iter().map(|v| v.parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("max relative error"));
}

#[test]
fn far_sweep_ratio_trends_to_one() {
    let o = passage(&[
        "sweep", "--regime", "far", "--n", "200,800,3200", "--k", "frac:0.5", "--boundary", "const:-1", "--model", "gaussian", "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap() == "model,boundary,n,k,regime,method,estimate,se,asymptotic,ratio,seed");
    let gaps: Vec<f64> = column(&text, "ratio").iter().map(|r| (r.parse::<f64>().unwrap() - 1.0).abs()).collect();
    assert_eq!(gaps.len(), 3);
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn csv_carries_seed_and_version() {
    let o = passage(&["survival", "--n", "40", "--k", "20", "--reps", "2000", "--seed", "11"]);
    assert!(o.status.success());
    let first = stdout(&o).lines().next().unwrap().to_string();
    assert!(first.starts_with("# passage "));
    assert!(first.contains(env!("CARGO_PKG_VERSION")));
    assert!(first.contains("seed=11"));
}

fn run_to(dir: &Path, name: &str, threads: &str, suite: &[&str]) -> Vec<u8> {
    let out = dir.join(name);
    let mut args = suite.to_vec();
    args.extend_from_slice(&["--threads", threads, "--out", out.to_str().unwrap()]);
    let o = passage(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let suites: [&[&str]; 3] = [
        &["survival", "--n", "60,80", "--k", "30", "--reps", "20000", "--seed", "5"],
        &["sweep", "--n", "100,200", "--k", "frac:0.5", "--method", "bridge_direct", "--reps", "5000", "--seed", "5"],
        &["cascade", "--n", "50", "--k", "10", "--reps", "20000", "--seed", "5"],
    ];
    for (i, suite) in suites.iter().enumerate() {
        let one = run_to(dir.path(), &format!("{i}-1.csv"), "1", suite);
        let eight = run_to(dir.path(), &format!("{i}-8.csv"), "8", suite);
        assert_eq!(one, eight, "suite {}", suite[0]);
    }
}

#[test]
fn validation_errors_exit_2() {
    assert_eq!(passage(&["oracle", "--n", "0", "--k", "1"]).status.code(), Some(2));
    assert_eq!(passage(&["oracle", "--n", "10", "--k", "10"]).status.code(), Some(2));
    assert_eq!(passage(&["survival", "--model", "cauchy", "--n", "10"]).status.code(), Some(2));
    assert_eq!(passage(&["survival", "--n", "10", "--boundary", "power:1:0.7"]).status.code(), Some(2));
    assert_eq!(passage(&["survival", "--model", "uniform", "--method", "bridge_direct", "--n", "10", "--k", "5"]).status.code(), Some(2));
    assert_eq!(passage(&["frobnicate"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n = 40\nflavour = strange\n").unwrap();
    let o = passage(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
}

#[test]
fn numerical_diagnostics_exit_3() {
    let o = passage(&["rayleigh", "--n", "50", "--reps", "1000", "--boundary", "const:0"]);
    assert_eq!(o.status.code(), Some(3));
    let o = passage(&["oracle", "--n", "4000", "--k", "2000", "--grid-nodes", "100"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# oracle run\nmodel = gaussian\nboundary = const:-1\nn = 400\nk = 100\n").unwrap();
    let o = passage(&["oracle", "--config", cfg.to_str().unwrap(), "--k", "200"]);
    assert!(o.status.success());
    assert_eq!(column(&stdout(&o), "k"), vec!["200"]);
}

#[test]
fn json_mirrors_csv_rows() {
    let o = passage(&["lg", "--boundary", "const:0", "--k", "50", "--reps", "4000", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 3);
    assert_eq!(arr[0]["display"], "undershoot");
    assert!(arr.iter().all(|r| r.as_object().unwrap().values().all(|x| !x.is_object() && !x.is_array())));
}

#[test]
fn cascade_and_ladder_run() {
    let o = passage(&["cascade", "--n", "50", "--k", "10", "--theta", "1", "--reps", "20000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let methods = column(&text, "method");
    assert_eq!(methods, vec!["order_statistics", "weighted", "exact", "kernel", "asymptotic"]);
    let values: Vec<f64> = column(&text, "value").iter().map(|v| v.parse().unwrap()).collect();
    assert!((values[2] - values[3]).abs() < 1e-3);

    let o = passage(&["ladder", "--model", "uniform", "--reps", "20000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(column(&stdout(&o), "quantity")[2], "product");
}
