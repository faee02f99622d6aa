use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
scenarios = "all9"
seeds = [0]

[simulator]
vocab_size = 300
doc_length = 30
horizon_days = 24
background_docs_per_topic_per_day = 3
"#;

fn novelty(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_novelty"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn tiny_dir(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), format!("{TINY}{extra}")).unwrap();
    dir
}

#[test]
fn bench_writes_every_table_and_exits_zero() {
    let dir = tiny_dir("");
    let o = novelty(dir.path(), &["--config", "c.toml", "--out", "r", "bench"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.csv", "cells.csv", "runtimes.csv"] {
        assert!(dir.path().join("r").join(f).is_file(), "{f} missing");
    }
    let cells = fs::read_to_string(dir.path().join("r/cells.csv")).unwrap();
    // header + 9 scenarios x 5 detectors x 1 seed
    assert_eq!(cells.lines().count(), 46);
}

#[test]
fn failed_cells_exit_two_and_the_run_completes() {
    let dir = tiny_dir("target_kl = 1000000.0\n");
    // The key belongs under [simulator]; TINY ends inside that table.
    let o = novelty(dir.path(), &["--config", "c.toml", "--out", "r", "bench"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("r/cells.csv").is_file());
}

#[test]
fn config_problems_exit_one() {
    let dir = tiny_dir("");
    let missing = novelty(dir.path(), &["--config", "nope.toml", "bench"]);
    assert_eq!(code(&missing), 1);

    fs::write(
        dir.path().join("bad.toml"),
        "seeds = [0]\nno_such_key = 1\n",
    )
    .unwrap();
    assert_eq!(
        code(&novelty(dir.path(), &["--config", "bad.toml", "bench"])),
        1
    );

    let no_sweep = novelty(dir.path(), &["--config", "c.toml", "sweep"]);
    assert_eq!(code(&no_sweep), 1);

    assert_eq!(code(&novelty(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&novelty(dir.path(), &["--help"])), 0);
}

#[test]
fn simulate_detect_evaluate_round_trip() {
    let dir = tiny_dir("");
    let run = |args: &[&str]| {
        let mut all = vec!["--config", "c.toml", "--out", "w"];
        all.extend_from_slice(args);
        let o = novelty(dir.path(), &all);
        assert_eq!(
            code(&o),
            0,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        o
    };
    run(&["simulate", "--scenario", "5", "--null"]);
    for f in [
        "s5.corpus.tsv",
        "s5.truth.json",
        "s5.meta.json",
        "s0.corpus.tsv",
    ] {
        assert!(dir.path().join("w").join(f).is_file(), "{f} missing");
    }
    run(&["detect", "--corpus", "w/s5.corpus.tsv", "--detector", "df"]);
    assert!(dir.path().join("w/s5.df.reports.jsonl").is_file());
    let o = run(&[
        "evaluate",
        "--corpus",
        "w/s5.corpus.tsv",
        "--truth",
        "w/s5.truth.json",
        "--reports",
        "w/s5.df.reports.jsonl",
    ]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("AUC"));
    let eval: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w/s5.df.eval.json")).unwrap())
            .unwrap();
    assert!(eval.is_object());
    assert!(dir.path().join("w/s5.df.curves.csv").is_file());
}

#[test]
fn sweep_preset_writes_sweep_table() {
    let dir = tiny_dir("");
    let o = novelty(
        dir.path(),
        &[
            "--config", "c.toml", "--out", "s", "--jobs", "1", "sweep", "--preset", "slope",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert!(sweep.starts_with("sweep_value,"));
    assert!(sweep.lines().count() > 1);
}

#[test]
fn ingest_then_holdout_with_auc() {
    let dir = tiny_dir("");
    let mut raw = String::new();
    // Ten days of "sports" and "weather", with "tech" appearing throughout.
    for day in 0..10u32 {
        let ts = 1_600_000_000 + u64::from(day) * 86_400;
        for i in 0..4 {
            raw += &format!("a{day}-{i}\t{ts}\tsports\tGoal match team score {i}\n");
            raw += &format!("b{day}-{i}\t{ts}\tweather\train cloud wind sun {i}\n");
        }
        raw += &format!("c{day}\t{ts}\ttech\tchip compiler kernel\n");
    }
    fs::write(dir.path().join("raw.tsv"), raw).unwrap();
    let o = novelty(
        dir.path(),
        &["--out", "i", "ingest", "raw.tsv", "--lowercase"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let corpus = fs::read_to_string(dir.path().join("i/corpus.tsv")).unwrap();
    assert_eq!(corpus.lines().count(), 90);
    assert!(corpus.contains("goal"));

    let o = novelty(
        dir.path(),
        &[
            "--out",
            "h",
            "holdout",
            "--corpus",
            "i/corpus.tsv",
            "--category",
            "tech",
            "--historic-days",
            "5",
            "--auc",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("h/holdout_auc.csv")).unwrap();
    assert!(table.starts_with("category,detector,auc"));
    assert_eq!(table.lines().count(), 6);
    assert!(dir.path().join("h/holdout.truth.json").is_file());

    let unknown = novelty(
        dir.path(),
        &[
            "--out",
            "h",
            "holdout",
            "--corpus",
            "i/corpus.tsv",
            "--category",
            "nope",
        ],
    );
    assert_eq!(code(&unknown), 1);
}
