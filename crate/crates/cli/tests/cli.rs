use std::fs;
use std::path::Path;

use l12glasso_cli::csv_io::load_matrix_csv;
use l12glasso_cli::run_command;
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["l12glasso"];
    argv.extend_from_slice(args);
    run_command(argv)
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn small_sim(dir: &Path, seed: &str) {
    let code = run(&[
        "simulate",
        "--n",
        "40",
        "--p",
        "12",
        "--q",
        "12",
        "--case",
        "2",
        "--seed",
        seed,
        "--out",
        &p(dir, ""),
    ]);
    assert_eq!(code, 0);
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_file())
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["--version"]), 0);
    assert_eq!(run(&["fit", "--help"]), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]), 1);
    assert_eq!(run(&["frobnicate"]), 1);
    assert_eq!(run(&["fit", "--x", "nope.csv"]), 1);
    let dir = TempDir::new().unwrap();
    small_sim(dir.path(), "1");
    let (x, y) = (p(dir.path(), "X.csv"), p(dir.path(), "Y.csv"));
    assert_eq!(run(&["fit", "--x", &x, "--y", &y, "--model", "glasso"]), 1);
    assert_eq!(run(&["fit", "--x", &x, "--y", &y, "--tau", "0.1", "--ratio", "10"]), 1);
    assert_eq!(run(&["fit", "--x", &x, "--y", &y, "--lambda1", "-1"]), 1);
    assert_eq!(run(&["fit", "--x", &x, "--y", "missing.csv"]), 1);
    assert_eq!(run(&["simulate", "--case", "5", "--out", &p(dir.path(), "s")]), 1);
    assert_eq!(
        run(&["simulate", "--p", "5", "--q", "60", "--out", &p(dir.path(), "s")]),
        1
    );
}

#[test]
fn solver_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let (x, y) = (dir.path().join("X.csv"), dir.path().join("Y.csv"));
    fs::write(&x, "1,2\n3,-1\n0.5,2\n-1,1\n").unwrap();
    // A constant output column leaves the empirical output covariance singular.
    fs::write(&y, "1,0\n2,0\n-1,0\n0.5,0\n").unwrap();
    let code = run(&[
        "fit",
        "--x",
        &x.to_string_lossy(),
        "--y",
        &y.to_string_lossy(),
        "--lambda1",
        "0.1",
        "--out",
        &p(dir.path(), "f"),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn simulate_writes_the_documented_files() {
    let dir = TempDir::new().unwrap();
    let code = run(&[
        "simulate",
        "--n",
        "120",
        "--p",
        "60",
        "--q",
        "60",
        "--module-size",
        "3",
        "--snps-per-module",
        "3",
        "--case",
        "2",
        "--seed",
        "7",
        "--out",
        &p(dir.path(), ""),
    ]);
    assert_eq!(code, 0);
    for name in [
        "X.csv",
        "Y.csv",
        "B_true.csv",
        "Theta_true.csv",
        "T.csv",
        "E.csv",
        "manifest.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let x = load_matrix_csv(&dir.path().join("X.csv"), false).unwrap();
    let b = load_matrix_csv(&dir.path().join("B_true.csv"), false).unwrap();
    assert_eq!((x.rows(), x.cols()), (120, 60));
    assert_eq!((b.rows(), b.cols()), (60, 60));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["t_case"]["ar1"], 0.6);
    assert_eq!(manifest["e_case"], "identity");
}

#[test]
fn ratio_sets_tau() {
    let dir = TempDir::new().unwrap();
    small_sim(dir.path(), "3");
    let out = p(dir.path(), "fit");
    let code = run(&[
        "fit",
        "--x",
        &p(dir.path(), "X.csv"),
        "--y",
        &p(dir.path(), "Y.csv"),
        "--model",
        "l12glasso",
        "--lambda1",
        "0.1",
        "--lambda2",
        "0.1",
        "--gamma",
        "0.05",
        "--ratio",
        "10",
        "--out",
        &out,
    ]);
    assert_eq!(code, 0);
    let trace: serde_json::Value =
        serde_json::from_slice(&fs::read(Path::new(&out).join("trace.json")).unwrap()).unwrap();
    let tau = trace["hyperparams"]["tau"].as_f64().unwrap();
    assert!((tau - 0.01).abs() < 1e-15, "{tau}");
    assert!(Path::new(&out).join("Theta.csv").exists());
}

#[test]
fn iclasso_is_l12glasso_without_tau() {
    let dir = TempDir::new().unwrap();
    small_sim(dir.path(), "4");
    let (x, y) = (p(dir.path(), "X.csv"), p(dir.path(), "Y.csv"));
    let common = ["--lambda1", "0.1", "--lambda2", "0.1", "--gamma", "0.05"];
    let mut a = vec!["fit", "--x", &x, "--y", &y, "--model", "iclasso", "--ratio", "10"];
    a.extend_from_slice(&common);
    let out_a = p(dir.path(), "a");
    a.extend_from_slice(&["--out", &out_a]);
    let mut b = vec!["fit", "--x", &x, "--y", &y, "--model", "l12glasso", "--tau", "0"];
    b.extend_from_slice(&common);
    let out_b = p(dir.path(), "b");
    b.extend_from_slice(&["--out", &out_b]);
    assert_eq!(run(&a), 0);
    assert_eq!(run(&b), 0);
    for name in ["B.csv", "Theta.csv"] {
        assert_eq!(
            fs::read(Path::new(&out_a).join(name)).unwrap(),
            fs::read(Path::new(&out_b).join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn baselines_write_only_what_they_estimate() {
    let dir = TempDir::new().unwrap();
    small_sim(dir.path(), "5");
    let (x, y) = (p(dir.path(), "X.csv"), p(dir.path(), "Y.csv"));
    for (model, has_theta) in [("lasso", false), ("gflasso", false), ("mrce", true)] {
        let out = p(dir.path(), model);
        assert_eq!(
            run(&["fit", "--x", &x, "--y", &y, "--model", model, "--out", &out]),
            0,
            "{model}"
        );
        assert_eq!(Path::new(&out).join("Theta.csv").exists(), has_theta, "{model}");
    }
}

#[test]
fn eval_scores_truth_against_itself() {
    let dir = TempDir::new().unwrap();
    small_sim(dir.path(), "6");
    let d = dir.path();
    let code = run(&[
        "eval",
        "--b",
        &p(d, "B_true.csv"),
        "--b-true",
        &p(d, "B_true.csv"),
        "--theta",
        &p(d, "Theta_true.csv"),
        "--theta-true",
        &p(d, "Theta_true.csv"),
        "--x-test",
        &p(d, "X.csv"),
        "--y-test",
        &p(d, "Y.csv"),
        "--out",
        &p(d, "eval"),
    ]);
    assert_eq!(code, 0);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(d.join("eval/metrics.json")).unwrap()).unwrap();
    assert_eq!(m["b"]["f1"], 1.0);
    assert_eq!(m["theta"]["f1"], 1.0);
    assert!(m["regression_error"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_writes_rows_in_grid_order() {
    let dir = TempDir::new().unwrap();
    small_sim(dir.path(), "8");
    let d = dir.path();
    let code = run(&[
        "sweep",
        "--x",
        &p(d, "X.csv"),
        "--y",
        &p(d, "Y.csv"),
        "--lambda1",
        "0.3,0.1",
        "--lambda2",
        "0.1",
        "--gamma",
        "0.05,0.1",
        "--ratio",
        "3,10",
        "--b-true",
        &p(d, "B_true.csv"),
        "--theta-true",
        &p(d, "Theta_true.csv"),
        "--out",
        &p(d, "sw"),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(d.join("sw/sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 4);
    assert!(lines[0].starts_with("model,ratio,lambda1"));
    let cells: Vec<Vec<&str>> = lines[1..].iter().map(|l| l.split(',').collect()).collect();
    let l1_g: Vec<(&str, &str, &str)> = cells.iter().map(|c| (c[1], c[2], c[4])).collect();
    assert_eq!(
        l1_g,
        [
            ("3", "0.3", "0.05"),
            ("3", "0.1", "0.05"),
            ("3", "0.3", "0.1"),
            ("3", "0.1", "0.1"),
            ("10", "0.3", "0.05"),
            ("10", "0.1", "0.05"),
            ("10", "0.3", "0.1"),
            ("10", "0.1", "0.1"),
        ]
    );
    for c in &cells {
        let ratio: f64 = c[1].parse().unwrap();
        let lambda1: f64 = c[2].parse().unwrap();
        let tau: f64 = c[5].parse().unwrap();
        assert_eq!(tau, lambda1 / ratio);
    }
    assert_eq!(lines.iter().filter(|l| l.contains(",true,")).count(), 2);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(d.join("sw/sweep.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = TempDir::new().unwrap();
            let d = dir.path();
            small_sim(d, "11");
            assert_eq!(
                run(&[
                    "fit",
                    "--x",
                    &p(d, "X.csv"),
                    "--y",
                    &p(d, "Y.csv"),
                    "--out",
                    &p(d, "fit")
                ]),
                0
            );
            let code = run(&[
                "sweep",
                "--x",
                &p(d, "X.csv"),
                "--y",
                &p(d, "Y.csv"),
                "--lambda1",
                "0.3,0.2,0.1",
                "--jobs",
                "3",
                "--seed",
                "5",
                "--out",
                &p(d, "sweep"),
            ]);
            assert_eq!(code, 0);
            (files(d), files(&d.join("fit")), files(&d.join("sweep")))
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}
