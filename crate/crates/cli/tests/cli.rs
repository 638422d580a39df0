use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[synth]
n_tasks = 6
n_ground_truth_clusters = 2
channels = 2

[hblr]
max_sweeps = 60

[baselines]
lambdas = [0.01, 1.0]
c = [1.0]
gamma_scale = [1.0]
"#;

struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        let w = Self { dir: tempfile::tempdir().unwrap() };
        std::fs::write(w.path("small.toml"), SMALL).unwrap();
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_fnirs-hblr"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg(self.path("small.toml"))
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    fn features(&self) -> PathBuf {
        self.ok(&["synth", "--out", "s/sessions.jsonl"]);
        self.ok(&["extract", "--input", "s/sessions.jsonl", "--out", "f.csv"]);
        self.path("f.csv")
    }
}

fn status(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn synth_writes_sessions_and_truth() {
    let w = Work::new();
    let stdout = w.ok(&["synth", "--out", "a/sessions.jsonl"]);
    assert!(stdout.contains("tasks 6"), "{stdout}");
    assert_eq!(std::fs::read_to_string(w.path("a/sessions.jsonl")).unwrap().lines().count(), 6);
    let truth: serde_json::Value = serde_json::from_slice(&read(&w.path("a/truth.json"))).unwrap();
    assert_eq!(truth.as_object().unwrap().len(), 6);
}

#[test]
fn synth_is_reproducible_per_seed() {
    let w = Work::new();
    w.ok(&["synth", "--seed", "7", "--out", "x/s.jsonl"]);
    w.ok(&["synth", "--seed", "7", "--out", "y/s.jsonl"]);
    w.ok(&["synth", "--seed", "8", "--out", "z/s.jsonl"]);
    assert_eq!(read(&w.path("x/s.jsonl")), read(&w.path("y/s.jsonl")));
    assert_eq!(read(&w.path("x/truth.json")), read(&w.path("y/truth.json")));
    assert_ne!(read(&w.path("x/s.jsonl")), read(&w.path("z/s.jsonl")));
}

#[test]
fn zero_tasks_is_a_usage_error() {
    let w = Work::new();
    let out = w.run(&["synth", "--n-tasks", "0", "--out", "s.jsonl"]);
    assert_eq!(status(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_tasks"));
}

#[test]
fn bad_config_and_flags_are_usage_errors() {
    let w = Work::new();
    std::fs::write(w.path("bad.toml"), "nonsense_key = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fnirs-hblr"))
        .args(["--config", w.path("bad.toml").to_str().unwrap(), "synth"])
        .output()
        .unwrap();
    assert_eq!(status(&out), 2);
    assert_eq!(status(&w.run(&["frobnicate"])), 2);
    assert_eq!(status(&w.run(&["train", "--model", "nope"])), 2);
}

#[test]
fn extract_layout_and_determinism() {
    let w = Work::new();
    w.ok(&["synth", "--out", "s.jsonl"]);
    let stdout = w.ok(&["extract", "--input", "s.jsonl", "--out", "a.csv"]);
    assert!(stdout.contains("windows 72 features 20"), "{stdout}");
    w.ok(&["extract", "--input", "s.jsonl", "--out", "b.csv"]);
    assert_eq!(read(&w.path("a.csv")), read(&w.path("b.csv")));
    let text = std::fs::read_to_string(w.path("a.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap().split(',').count(), 22);
    assert_eq!(text.lines().count(), 73);

    w.ok(&["extract", "--input", "s.jsonl", "--out", "c.csv", "--seed", "5"]);
    assert_ne!(read(&w.path("a.csv")), read(&w.path("c.csv")));
}

#[test]
fn eight_channels_give_eighty_features() {
    let w = Work::new();
    std::fs::write(w.path("eight.toml"), "[synth]\nn_tasks = 2\nn_ground_truth_clusters = 1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fnirs-hblr"))
        .current_dir(w.dir.path())
        .args(["--config", "eight.toml", "synth", "--out", "e.jsonl"])
        .output()
        .unwrap();
    assert!(out.status.success());
    w.ok(&["extract", "--input", "e.jsonl", "--out", "e.csv"]);
    let text = std::fs::read_to_string(w.path("e.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap().split(',').count(), 82);
}

#[test]
fn extract_missing_file_exits_2() {
    let w = Work::new();
    assert_eq!(status(&w.run(&["extract", "--input", "absent.jsonl", "--out", "f.csv"])), 2);
}

#[test]
fn train_models() {
    let w = Work::new();
    let f = w.features();
    let f = f.to_str().unwrap();
    w.ok(&["train", "--input", f, "--model", "hblr", "--k", "4", "--tau10", "0.01", "--tau20", "0.1", "--out", "h.json"]);
    let model: serde_json::Value = serde_json::from_slice(&read(&w.path("h.json"))).unwrap();
    assert_eq!(model["hyper"]["k"], 4);
    assert_eq!(model["theta"].as_array().unwrap().len(), 4);
    assert!(model["normalizer"].is_object());

    w.ok(&["train", "--input", f, "--model", "logreg-l2", "--out", "l.json"]);
    let model: serde_json::Value = serde_json::from_slice(&read(&w.path("l.json"))).unwrap();
    assert_eq!(model["model_type"], "logreg-l2");
    assert_eq!(model["model"]["weights"].as_array().unwrap().len(), 20);

    w.ok(&["train", "--input", f, "--model", "svm-rbf", "--c", "1.0", "--out", "s.json"]);
    assert_eq!(status(&w.run(&["train", "--input", f, "--k", "0", "--out", "z.json"])), 2);
}

#[test]
fn eval_report_and_determinism() {
    let w = Work::new();
    let f = w.features();
    let f = f.to_str().unwrap();
    let stdout = w.ok(&["eval", "--input", f, "--model", "hblr,logreg-l2", "--folds", "3", "--out", "r1/report.json"]);
    let header: Vec<&str> = stdout.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["model", "accuracy", "precision", "recall", "f1"]);
    assert!(stdout.contains("hblr-k4") && stdout.contains("logreg-l2"));
    w.ok(&["eval", "--input", f, "--model", "hblr,logreg-l2", "--folds", "3", "--out", "r2/report.json"]);
    let strip = |p: &str| {
        let mut v: serde_json::Value = serde_json::from_slice(&read(&w.path(p))).unwrap();
        v.as_object_mut().unwrap().remove("membership_csv");
        v
    };
    assert_eq!(strip("r1/report.json"), strip("r2/report.json"));
    assert_eq!(read(&w.path("r1/folds.csv")), read(&w.path("r2/folds.csv")));
    assert_eq!(read(&w.path("r1/memberships.csv")), read(&w.path("r2/memberships.csv")));
    assert_eq!(std::fs::read_to_string(w.path("r1/folds.csv")).unwrap().lines().count(), 7);

    assert_eq!(status(&w.run(&["eval", "--input", f, "--folds", "1", "--out", "r3.json"])), 2);
}

#[test]
fn clusters_export() {
    let w = Work::new();
    let f = w.features();
    let f = f.to_str().unwrap();
    w.ok(&["train", "--input", f, "--k", "4", "--out", "h.json"]);
    let stdout = w.ok(&["clusters", "--model-file", "h.json", "--out", "m.csv", "--truth", "s/truth.json"]);
    assert!(stdout.contains("ARI "), "{stdout}");
    let text = std::fs::read_to_string(w.path("m.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "task_id,phi_1,phi_2,phi_3,phi_4");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for r in rows {
        let v: Vec<f64> = r.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.len(), 4);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    w.ok(&["train", "--input", f, "--model", "logreg-l1", "--lambda", "0.1", "--out", "l.json"]);
    assert_eq!(status(&w.run(&["clusters", "--model-file", "l.json", "--out", "x.csv"])), 2);
}

#[test]
fn clusters_perfect_alignment() {
    let w = Work::new();
    w.ok(&["synth", "--clusters", "1", "--out", "s/sessions.jsonl"]);
    w.ok(&["extract", "--input", "s/sessions.jsonl", "--out", "f.csv"]);
    w.ok(&["train", "--input", "f.csv", "--k", "1", "--out", "h.json"]);
    let stdout = w.ok(&["clusters", "--model-file", "h.json", "--out", "m.csv", "--truth", "s/truth.json"]);
    assert!(stdout.contains("ARI 1"), "{stdout}");
}

#[test]
fn full_pipeline_is_byte_identical() {
    let runs: Vec<Work> = (0..2).map(|_| Work::new()).collect();
    for w in &runs {
        w.ok(&["synth", "--seed", "3", "--out", "out/sessions.jsonl"]);
        w.ok(&["extract", "--seed", "3", "--input", "out/sessions.jsonl", "--out", "out/features.csv"]);
        w.ok(&["eval", "--seed", "3", "--input", "out/features.csv", "--folds", "3", "--out", "out/report.json"]);
    }
    for name in ["sessions.jsonl", "truth.json", "features.csv", "report.json", "folds.csv", "memberships.csv"] {
        let p = format!("out/{name}");
        assert_eq!(read(&runs[0].path(&p)), read(&runs[1].path(&p)), "{name}");
    }
}
