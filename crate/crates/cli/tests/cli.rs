//! End-to-end runs of the `cns` binary on a tiny two-community dataset, including the
//! exit codes for invalid input (2) and non-convergence (3).

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

/// Two 10-node cliques joined by one edge; class = community, features are noisy
/// community indicators.
fn write_dataset(dir: &Path) {
    let mut edges = String::from("# two communities\n");
    for block in [0usize, 10] {
        for u in 0..10 {
            for v in u + 1..10 {
                edges += &format!("{} {}\n", block + u, block + v);
            }
        }
    }
    edges += "9 10\n";
    std::fs::write(dir.join("edges.txt"), edges).unwrap();
    let mut labels = String::from("node,label\n");
    let mut features = String::from("f0,f1,f2\n");
    for i in 0..20 {
        let c = i / 10;
        labels += &format!("{i},{c}\n");
        let noise = (i % 3) as f64 * 0.1;
        features += &format!("{},{},{noise}\n", 1 - c, c);
    }
    std::fs::write(dir.join("labels.csv"), labels).unwrap();
    std::fs::write(dir.join("features.csv"), features).unwrap();
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("tiny")).unwrap();
        write_dataset(&dir.path().join("tiny"));
        Self { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }

    fn cns(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_cns"))
            .args(args)
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.cns(args);
        assert!(
            out.status.success(),
            "cns {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn split(&self) -> String {
        let split = self.path("tiny.split");
        self.ok(&[
            "split",
            "--data",
            &self.path("tiny"),
            "--seed",
            "3",
            "--out",
            &split,
        ]);
        split
    }

    fn train(&self, split: &str) -> String {
        let z = self.path("z.csv");
        self.ok(&[
            "train",
            "--data",
            &self.path("tiny"),
            "--split",
            split,
            "--base",
            "plain-linear",
            "--epochs",
            "50",
            "--predictions",
            &z,
        ]);
        z
    }
}

#[test]
fn split_train_correct_smooth_eval() {
    let f = Fixture::new();
    let data = f.path("tiny");
    let split = f.split();
    let z = f.train(&split);
    let report = f.path("report.json");
    let per_node = f.path("nodes.csv");
    let stdout = f.ok(&[
        "cas",
        "--data",
        &data,
        "--split",
        &split,
        "--predictions",
        &z,
        "--search",
        "--report",
        &report,
        "--per-node",
        &per_node,
        "--require-convergence",
    ]);
    let json: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let final_acc = json["test_accuracy"]["final"].as_f64().unwrap();
    assert_eq!(final_acc, 1.0, "two clean communities must be separated");
    assert_eq!(json["converged"], serde_json::Value::Bool(true));
    assert!(Path::new(&report).exists());

    let eval = f.ok(&[
        "eval",
        "--data",
        &data,
        "--split",
        &split,
        "--predictions",
        &per_node,
    ]);
    assert_eq!(eval.trim().parse::<f64>().unwrap(), final_acc);
}

#[test]
fn label_propagation_needs_no_predictions() {
    let f = Fixture::new();
    let split = f.split();
    let stdout = f.ok(&[
        "cas",
        "--data",
        &f.path("tiny"),
        "--split",
        &split,
        "--mode",
        "lp-only",
    ]);
    let json: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(json["test_accuracy"]["base"].is_null());
    assert!(json["test_accuracy"]["final"].as_f64().unwrap() >= 0.75);
}

#[test]
fn invalid_input_exits_with_2() {
    let f = Fixture::new();
    let data = f.path("tiny");
    let split = f.split();
    let z = f.train(&split);
    for args in [
        vec![
            "cas",
            "--data",
            &data,
            "--split",
            &split,
            "--predictions",
            &z,
            "--alpha-smooth",
            "1.0",
        ],
        vec!["cas", "--data", &data, "--split", &split, "--mode", "full"],
        vec![
            "split",
            "--data",
            &data,
            "--fractions",
            "0.9,0.2,0.1",
            "--out",
            "x.split",
        ],
    ] {
        let out = f.cns(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    std::fs::write(f.path("bad.split"), "[train]\n0\n[valid]\n0\n[test]\n1\n").unwrap();
    let out = f.cns(&[
        "cas",
        "--data",
        &data,
        "--split",
        &f.path("bad.split"),
        "--mode",
        "lp-only",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exhausted_iteration_budget_exits_with_3_only_when_required() {
    let f = Fixture::new();
    let data = f.path("tiny");
    let split = f.split();
    let z = f.train(&split);
    let base = [
        "cas",
        "--data",
        &data,
        "--split",
        &split,
        "--predictions",
        &z,
        "--max-iters",
        "1",
    ];
    let lenient = f.cns(&base);
    assert_eq!(lenient.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("warning"));
    let mut strict = base.to_vec();
    strict.push("--require-convergence");
    assert_eq!(f.cns(&strict).status.code(), Some(3));
}

#[test]
fn bench_writes_one_row_per_configuration() {
    let f = Fixture::new();
    let out = f.path("bench.csv");
    f.ok(&[
        "bench",
        "--data",
        &f.path("tiny"),
        "--out",
        &out,
        "--seeds",
        "2",
        "--reps",
        "1",
        "--bases",
        "plain-linear",
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rows = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rows.headers().unwrap().len(), 15);
    let n = rows.records().count();
    assert!(
        n >= 3,
        "expected LP, base-only and C&S rows, got {n}:\n{text}"
    );
    // Re-running replaces rows rather than appending duplicates.
    f.ok(&[
        "bench",
        "--data",
        &f.path("tiny"),
        "--out",
        &out,
        "--seeds",
        "2",
        "--reps",
        "1",
        "--bases",
        "plain-linear",
    ]);
    assert_eq!(csv::Reader::from_path(&out).unwrap().records().count(), n);
}
