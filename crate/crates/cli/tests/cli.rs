use std::path::Path;
use std::process::{Command, Output};

fn edcnn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edcnn"))
        .args(args)
        .current_dir(dir)
        .env_remove("EDCNN_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Value after `key` on the first line that starts with it.
fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .and_then(|rest| rest.split_whitespace().next())
        .unwrap_or_else(|| panic!("no '{key}' in\n{text}"))
        .parse()
        .unwrap()
}

fn sinc_norm(x: &[f64]) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        1.0
    } else {
        r.sin() / r
    }
}

#[test]
fn every_command_echoes_its_config_first() {
    let dir = tempfile::tempdir().unwrap();
    let o = edcnn(
        &[
            "capacity", "--L", "2", "--s", "2", "--dim", "4", "--m", "100", "--theta", "0.1",
        ],
        dir.path(),
    );
    assert!(stdout(&o).starts_with("config {"), "{}", stdout(&o));
    let o = edcnn(
        &["simulate", "--dim", "2", "--m", "3", "--out", "a.csv"],
        dir.path(),
    );
    let first = stdout(&o).lines().next().unwrap().to_string();
    assert!(
        first.contains("\"seed\":42") && first.contains("\"noise_var\":0.01"),
        "{first}"
    );
}

#[test]
fn simulate_writes_rows_and_rejects_missing_out() {
    let dir = tempfile::tempdir().unwrap();
    let o = edcnn(
        &[
            "simulate",
            "--dim",
            "30",
            "--m",
            "100",
            "--seed",
            "7",
            "--out",
            "train.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("train.csv")).unwrap();
    assert_eq!(text.lines().count(), 100);
    assert!(text.lines().all(|l| l.split(',').count() == 31));

    let o = edcnn(&["simulate", "--dim", "30", "--m", "100"], dir.path());
    assert_eq!(code(&o), 2);
    let o = edcnn(
        &[
            "simulate",
            "--dim",
            "3",
            "--m",
            "10",
            "--out",
            "x.csv",
            "--noise-var",
            "-1",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    let o = edcnn(
        &[
            "simulate",
            "--dim",
            "3",
            "--m",
            "10",
            "--out",
            "missing/dir/x.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn zero_noise_targets_are_clean_sinc() {
    let dir = tempfile::tempdir().unwrap();
    let o = edcnn(
        &[
            "simulate",
            "--dim",
            "3",
            "--m",
            "50",
            "--noise-var",
            "0",
            "--out",
            "c.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    for line in text.lines() {
        let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (x, y) = vals.split_at(3);
        assert!((y[0] - sinc_norm(x)).abs() <= 1e-15, "{line}");
    }
}

#[test]
fn seed_precedence_flag_then_env_then_default() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str], env: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_edcnn"));
        cmd.args(["simulate", "--dim", "2", "--m", "20", "--out", out])
            .args(args)
            .current_dir(dir.path());
        match env {
            Some(v) => cmd.env("EDCNN_SEED", v),
            None => cmd.env_remove("EDCNN_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let flag7 = run(&["--seed", "7"], None, "a.csv");
    let env7 = run(&[], Some("7"), "b.csv");
    let flag_wins = run(&["--seed", "7"], Some("9"), "c.csv");
    let default = run(&[], None, "d.csv");
    let flag42 = run(&["--seed", "42"], None, "e.csv");
    assert_eq!(flag7, env7);
    assert_eq!(flag7, flag_wins);
    assert_eq!(default, flag42);
    assert_ne!(default, flag7);
}

#[test]
fn train_interpolates_a_single_point() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("one.csv"), "0.5,-0.25,0.3\n").unwrap();
    let o = edcnn(
        &[
            "train",
            "--data",
            "one.csv",
            "--task",
            "regression",
            "--s",
            "2",
            "--relax-filter-range",
            "--depth",
            "1",
            "--epochs",
            "2000",
            "--lr",
            "0.01",
            "--patience",
            "0",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(field(&stdout(&o), "final_train_loss:") <= 1e-4);
    for f in ["model.edcnn", "report.json", "epochs.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let epochs = std::fs::read_to_string(dir.path().join("epochs.csv")).unwrap();
    assert_eq!(epochs.lines().count(), 2001);
}

#[test]
fn train_enforces_filter_range() {
    let dir = tempfile::tempdir().unwrap();
    edcnn(
        &["simulate", "--dim", "5", "--m", "40", "--out", "d.csv"],
        dir.path(),
    );
    let o = edcnn(
        &[
            "train",
            "--data",
            "d.csv",
            "--task",
            "regression",
            "--s",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("2 <= s <= d"), "{}", stderr(&o));
    let o = edcnn(
        &[
            "train",
            "--data",
            "d.csv",
            "--task",
            "regression",
            "--s",
            "6",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn train_is_reproducible_and_reports_test_metric() {
    let dir = tempfile::tempdir().unwrap();
    edcnn(
        &["simulate", "--dim", "4", "--m", "120", "--out", "tr.csv"],
        dir.path(),
    );
    edcnn(
        &[
            "simulate", "--dim", "4", "--m", "60", "--test", "--out", "te.csv",
        ],
        dir.path(),
    );
    let args = |report: &'static str| {
        vec![
            "train",
            "--data",
            "tr.csv",
            "--test",
            "te.csv",
            "--task",
            "regression",
            "--s",
            "2",
            "--seed",
            "5",
            "--epochs",
            "20",
            "--report-out",
            report,
        ]
    };
    let a = edcnn(&args("r1.json"), dir.path());
    let b = edcnn(&args("r2.json"), dir.path());
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(
        std::fs::read(dir.path().join("r1.json")).unwrap(),
        std::fs::read(dir.path().join("r2.json")).unwrap()
    );
    let rmse = field(&stdout(&a), "test_rmse:");
    assert!(rmse.is_finite() && rmse >= 0.0);
    assert_eq!(stdout(&a), stdout(&b).replace("r2.json", "r1.json"));
}

#[test]
fn train_classifier_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::new();
    for i in 0..40 {
        let label = i % 2;
        let sign = if label == 0 { -1.0 } else { 1.0 };
        csv.push_str(&format!(
            "{},{},{},{label}\n",
            sign * 2.0,
            sign * (1.0 + i as f64 / 40.0),
            sign
        ));
    }
    std::fs::write(dir.path().join("c.csv"), csv).unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"max_epochs": 50, "learning_rate": 0.01}"#,
    )
    .unwrap();
    let o = edcnn(
        &[
            "train", "--data", "c.csv", "--test", "c.csv", "--task", "classify", "--s", "2",
            "--depth", "2", "--config", "cfg.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("\"max_epochs\":50"));
    assert!(field(&stdout(&o), "test_error:") <= 0.1);

    std::fs::write(dir.path().join("bad.json"), r#"{"max_epoch": 50}"#).unwrap();
    let o = edcnn(
        &[
            "train", "--data", "c.csv", "--task", "classify", "--s", "2", "--config", "bad.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("max_epoch"));
}

#[test]
fn train_missing_data_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = edcnn(
        &[
            "train",
            "--data",
            "nope.csv",
            "--task",
            "regression",
            "--s",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    let o = edcnn(
        &["train", "--data", "nope.csv", "--task", "guess", "--s", "2"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn capacity_table_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let o = edcnn(
        &[
            "capacity", "--L", "2", "--s", "2", "--dim", "4", "--m", "100", "--theta", "0.1",
            "--json",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(field(&text, "n_params"), 28.0);
    assert_eq!(field(&text, "n_neurons"), 19.0);
    let json: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(json["n_params"], 28);
    assert_eq!(json["n_neurons"], 19);
    for (row, key) in [
        ("pdim_bound", "pdim_bound"),
        ("covering_log2_bound", "covering_log2_bound"),
        ("consistency_ratio", "consistency_ratio"),
        ("M ", "M"),
    ] {
        assert_eq!(field(&text, row), json[key].as_f64().unwrap(), "{key}");
    }
    assert!((field(&text, "pdim_bound") - 2.0 * 28.0 * 19f64.ln()).abs() < 1e-9);
}

#[test]
fn capacity_rejects_theta_outside_range() {
    let dir = tempfile::tempdir().unwrap();
    for theta in ["0.6", "0", "0.5"] {
        let o = edcnn(
            &[
                "capacity", "--L", "2", "--s", "2", "--dim", "4", "--m", "100", "--theta", theta,
            ],
            dir.path(),
        );
        assert_eq!(code(&o), 2, "theta {theta}");
        assert!(stderr(&o).contains("(0, 1/2)"));
    }
}

#[test]
fn check_suites() {
    let dir = tempfile::tempdir().unwrap();
    let o = edcnn(&["check", "--conv", "--seed", "1"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("conv: pass"));

    let o = edcnn(&["check", "--grad"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("20 networks"));
    let err: f64 = text
        .split("max rel error ")
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!(err <= 1e-4);

    let o = edcnn(
        &["check", "--schedule", "--theta", "0.05", "--alpha", "0.05"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("decreasing: true"));

    let o = edcnn(
        &["check", "--schedule", "--theta", "0.49", "--alpha", "0.3"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("decreasing: false"));

    assert_eq!(code(&edcnn(&["check"], dir.path())), 2);
    assert_eq!(
        code(&edcnn(
            &["check", "--schedule", "--theta", "0.7"],
            dir.path()
        )),
        2
    );
}

const SMALL_SPEC: &str = r#"{
  "kind": "consistency",
  "dims": [1, 3],
  "m_grid": [40, 80],
  "trials": 2,
  "test_size": 50,
  "trainer": {"max_epochs": 5, "filter_range": "relaxed"}
}"#;

#[test]
fn experiment_writes_curve_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.json"), SMALL_SPEC).unwrap();
    let a = edcnn(
        &[
            "experiment",
            "--spec",
            "spec.json",
            "--out-dir",
            "a",
            "--jobs",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let b = edcnn(
        &[
            "experiment",
            "--spec",
            "spec.json",
            "--out-dir",
            "b",
            "--jobs",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(code(&b), 0);
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    let curve = String::from_utf8(read("a/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 4);
    assert_eq!(read("a/curve.csv"), read("b/curve.csv"));
    assert_eq!(read("a/trials.csv"), read("b/trials.csv"));
    let manifest: serde_json::Value = serde_json::from_slice(&read("a/manifest.json")).unwrap();
    assert_eq!(manifest["spec"]["kind"], "consistency");
}

#[test]
fn experiment_validation_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"kind": "consistency", "m_grid": [500, 100]}"#,
    )
    .unwrap();
    let o = edcnn(&["experiment", "--spec", "bad.json"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("m_grid"), "{}", stderr(&o));
    assert!(!dir.path().join("results").exists());

    let o = edcnn(&["experiment", "--spec", "absent.json"], dir.path());
    assert_eq!(code(&o), 1);
    std::fs::write(dir.path().join("ok.json"), SMALL_SPEC).unwrap();
    let o = edcnn(
        &["experiment", "--spec", "ok.json", "--jobs", "0"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}
