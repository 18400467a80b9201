//! End-to-end runs of the `jamloc` binary on tiny datasets.

use std::path::Path;
use std::process::Command;

fn jamloc(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_jamloc"))
        .args(args)
        .output()
        .expect("spawn jamloc");
    assert!(
        out.status.success(),
        "jamloc {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_train_evaluate_plot() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("static.jsonl");
    let ckpt = dir.path().join("cage.json");
    let eval = dir.path().join("eval");
    let plots = dir.path().join("plots");

    jamloc(&[
        "generate",
        "--seed",
        "3",
        "--kind",
        "static",
        "--count",
        "3",
        "--out",
        p(&data),
    ]);
    // header line plus 4 topologies x 2 placements x 3
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 25);

    jamloc(&[
        "train",
        "--seed",
        "3",
        "--data",
        p(&data),
        "--arch",
        "cage",
        "--epochs",
        "2",
        "--layers",
        "2",
        "--width",
        "8",
        "--out",
        p(&ckpt),
    ]);
    assert!(ckpt.exists());

    jamloc(&[
        "evaluate",
        "--data",
        p(&data),
        "--checkpoint",
        p(&ckpt),
        "--split",
        "all",
        "--out",
        p(&eval),
    ]);
    for f in ["report.json", "aggregates.csv", "records.csv"] {
        assert!(eval.join(f).exists(), "missing {f}");
    }
    let agg = std::fs::read_to_string(eval.join("aggregates.csv")).unwrap();
    assert!(agg.lines().any(|l| l.starts_with("all,")));

    jamloc(&[
        "plot",
        "--report",
        p(&eval.join("report.json")),
        "--out",
        p(&plots),
    ]);
    let svgs = std::fs::read_dir(&plots)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "svg")
        })
        .count();
    assert!(svgs >= 5);

    let base = dir.path().join("baseline");
    jamloc(&[
        "baseline",
        "--data",
        p(&data),
        "--estimators",
        "wcl,lsq",
        "--split",
        "all",
        "--out",
        p(&base),
    ]);
    assert!(base.join("wcl").join("report.json").exists());
    assert!(base.join("lsq").join("report.json").exists());
}

#[test]
fn ablation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("static.jsonl");
    jamloc(&[
        "generate",
        "--seed",
        "5",
        "--kind",
        "static",
        "--count",
        "2",
        "--out",
        p(&data),
    ]);
    let run = |name: &str| {
        let out = dir.path().join(name);
        jamloc(&[
            "ablate",
            "--seed",
            "5",
            "--data",
            p(&data),
            "--ablation",
            "k",
            "--arch",
            "gat",
            "--epochs",
            "1",
            "--out",
            p(&out),
        ]);
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    assert_eq!(a.lines().count(), 5);
}

#[test]
fn bad_input_is_reported() {
    let out = Command::new(env!("CARGO_BIN_EXE_jamloc"))
        .args([
            "evaluate",
            "--data",
            "/nonexistent.jsonl",
            "--checkpoint",
            "/nonexistent.json",
            "--out",
            "/tmp/x",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
