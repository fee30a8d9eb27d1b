use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vecsparch")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Row sums of a coordinate-list weights file.
fn row_sums(text: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let n: usize = lines.next().unwrap().trim_start_matches("n=").parse().unwrap();
    let mut sums = vec![0.0; n];
    for l in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        sums[t[0].parse::<usize>().unwrap()] += t[2].parse::<f64>().unwrap();
    }
    sums
}

#[test]
fn weights_grid_is_row_stochastic() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["weights", "--grid", "7x7", "--scheme", "queen", "--standardize", "--out", "w"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sums = row_sums(&fs::read_to_string(tmp.path().join("w/weights.txt")).unwrap());
    assert_eq!(sums.len(), 49);
    assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-12));
    assert!(tmp.path().join("w/validation.txt").exists());
    assert_eq!(manifest(&tmp.path().join("w"))["command"], "weights");
}

#[test]
fn degenerate_grid_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["weights", "--grid", "1x1", "--scheme", "queen"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn loaded_weights_are_validated() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("w.csv"), "0,1,1\n1,0,0\n1,0,0\n").unwrap();
    let o = run(tmp.path(), &["weights", "--load", "w.csv", "--validate", "--bound", "1.0", "--out", "v"]);
    assert_eq!(code(&o), 2);
    let report = fs::read_to_string(tmp.path().join("v/validation.txt")).unwrap();
    assert!(report.contains("FAIL"));
    assert_eq!(fs::read_to_string(tmp.path().join("w.csv")).unwrap(), "0,1,1\n1,0,0\n1,0,0\n");

    let o = run(tmp.path(), &["weights", "--load", "w.csv", "--standardize", "--validate", "--out", "s"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn simulate_model_a_panel_shape() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["simulate", "--model", "A", "--grid", "5x5", "--t", "30", "--seed", "11", "--out", "s"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let panel = fs::read_to_string(tmp.path().join("s/panel.csv")).unwrap();
    assert_eq!(panel.lines().count(), 1 + 25 * 2 * 31);
    let log_h = fs::read_to_string(tmp.path().join("s/log_h.csv")).unwrap();
    assert_eq!(log_h.lines().count(), 1 + 25 * 2 * 31);
    let m = manifest(&tmp.path().join("s"));
    assert_eq!(m["config"]["seed"], 11);
    assert_eq!(m["details"]["stability"]["stable"], true);

    // same seed, same bytes
    let o = run(tmp.path(), &["simulate", "--model", "A", "--grid", "5x5", "--t", "30", "--seed", "11", "--out", "s2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(panel, fs::read_to_string(tmp.path().join("s2/panel.csv")).unwrap());
}

#[test]
fn simulate_refuses_unstable_parameters() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        tmp.path(),
        &["simulate", "--a", "1,1", "--psi", "0.5,0.1,0.1,0.5", "--pi", "0.9,0,0,0.9", "--grid", "5x5", "--out", "u"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("spectral radius"));
    assert!(!tmp.path().join("u/panel.csv").exists());
}

#[test]
fn fig1_emits_four_grids() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["simulate", "--fig1", "--seed", "7", "--out", "f"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let grids: Vec<_> = fs::read_dir(tmp.path().join("f"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("fig1_"))
        .collect();
    assert_eq!(grids.len(), 4);
    for g in grids {
        let text = fs::read_to_string(tmp.path().join("f").join(&g)).unwrap();
        assert_eq!(text.lines().count(), 30);
        assert!(text.lines().all(|l| l.split(',').count() == 30));
    }
}

fn simulated_panel(dir: &Path) {
    let o = run(dir, &["simulate", "--model", "A", "--grid", "5x5", "--t", "60", "--seed", "3", "--out", "data"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(dir, &["weights", "--grid", "5x5", "--standardize", "--out", "data", "--output", "w25.txt"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn fit_writes_ten_parameter_rows_and_echoes_sigma2u() {
    let tmp = TempDir::new().unwrap();
    simulated_panel(tmp.path());
    let before = fs::read(tmp.path().join("data/panel.csv")).unwrap();
    let o = run(tmp.path(), &["fit", "--panel", "data/panel.csv", "--weights", "data/w25.txt", "--out", "fit"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("fit/fit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 10);
    assert!(csv.starts_with("parameter,row,column,estimate,std_error,t_value,marker"));
    let doc = fs::read_to_string(tmp.path().join("fit/fit.txt")).unwrap();
    assert!(doc.contains("Significance: * |t| > 1.9, ** |t| > 2"));
    let m = manifest(&tmp.path().join("fit"));
    assert!((m["config"]["sigma2u"].as_f64().unwrap() - 4.9348).abs() < 1e-4);
    assert_eq!(fs::read(tmp.path().join("data/panel.csv")).unwrap(), before);
}

#[test]
fn fit_conventional_markers() {
    let tmp = TempDir::new().unwrap();
    simulated_panel(tmp.path());
    let o = run(
        tmp.path(),
        &["fit", "--panel", "data/panel.csv", "--weights", "data/w25.txt", "--conventional", "--out", "fit"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = fs::read_to_string(tmp.path().join("fit/fit.txt")).unwrap();
    assert!(doc.contains("Significance: * |t| > 1.96, ** |t| > 2.576"));
}

#[test]
fn fit_rejects_mismatched_weights() {
    let tmp = TempDir::new().unwrap();
    simulated_panel(tmp.path());
    let o = run(tmp.path(), &["weights", "--grid", "7x7", "--standardize", "--out", "w49"]);
    assert_eq!(code(&o), 0);
    let o = run(tmp.path(), &["fit", "--panel", "data/panel.csv", "--weights", "w49/weights.txt", "--out", "fit"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("49"));
}

#[test]
fn fit_reports_non_convergence_with_exit_3() {
    let tmp = TempDir::new().unwrap();
    simulated_panel(tmp.path());
    let o = run(
        tmp.path(),
        &["fit", "--panel", "data/panel.csv", "--weights", "data/w25.txt", "--max-iter", "2", "--out", "fit"],
    );
    assert_eq!(code(&o), 3);
    assert!(tmp.path().join("fit/fit.txt").exists());
    assert_eq!(manifest(&tmp.path().join("fit"))["exit_code"], 3);
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = TempDir::new().unwrap();
    simulated_panel(tmp.path());
    fs::write(
        tmp.path().join("run.toml"),
        "out = \"cfg\"\n[fit]\npanel = \"data/panel.csv\"\nweights = \"data/w25.txt\"\nsigma2u = 5.0\nmax_iter = 300\n",
    )
    .unwrap();
    let o = run(tmp.path(), &["--config", "run.toml", "fit", "--sigma2u", "4.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&tmp.path().join("cfg"));
    assert_eq!(m["config"]["sigma2u"], 4.5);
    assert_eq!(m["config"]["max_iter"], 300);
}

#[test]
fn mc_tables_are_identical_across_worker_counts() {
    let tmp = TempDir::new().unwrap();
    let args = |w: &'static str, out: &'static str| {
        vec!["mc", "--model", "A", "--dist", "normal", "--reps", "12", "--sizes", "5x5x30", "--workers", w, "--out", out]
    };
    assert_eq!(code(&run(tmp.path(), &args("1", "one"))), 0);
    assert_eq!(code(&run(tmp.path(), &args("4", "four"))), 0);
    for f in ["mc_tables.txt", "mc_tables.csv", "mc_report.json"] {
        assert_eq!(fs::read(tmp.path().join("one").join(f)).unwrap(), fs::read(tmp.path().join("four").join(f)).unwrap());
    }
    let csv = fs::read_to_string(tmp.path().join("one/mc_tables.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header[7..], ["a", "psi11", "psi21", "psi12", "psi22", "pi11", "pi21", "pi12", "pi22"]);
}

#[test]
fn mc_rejects_unstable_design() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("my.toml"),
        r#"model_id = "X"
a = [1.0, 1.0]
psi = [[0.5, 0.1], [0.1, 0.5]]
pi = [[0.9, 0.0], [0.0, 0.9]]
sizes = [{ rows = 5, cols = 5, t_len = 30 }]
error_dists = ["normal"]
replications = 10
seed = 1
"#,
    )
    .unwrap();
    let o = run(tmp.path(), &["mc", "--design", "my.toml", "--out", "mc"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("not stable"));
}

#[test]
fn bad_flags_exit_with_usage() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["fit", "--no-such-flag"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"));
}
