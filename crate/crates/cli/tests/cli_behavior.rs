//! End-to-end command behavior: exit codes, pre-flight plan validation,
//! config-file precedence, and report rendering.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_icufuse")
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "icufuse-cli-{tag}-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn make_cohort(dir: &Path, n: usize, seed: u64) {
    let out = Command::new(bin())
        .args([
            "synth",
            "--n",
            &n.to_string(),
            "--features",
            "4",
            "--seed",
            &seed.to_string(),
            "--prevalence",
            "in_hospital=0.3",
            "--prevalence",
            "in_icu=0.15",
            "--prevalence",
            "los_gt3=0.4",
            "--prevalence",
            "los_gt7=0.1",
            "--out",
        ])
        .arg(dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_is_deterministic_and_validates_flags() {
    let base = scratch("synth");
    let a = base.join("a");
    let b = base.join("b");
    make_cohort(&a, 60, 11);
    make_cohort(&b, 60, 11);
    for file in ["timeseries.csv", "entities.csv", "labels.csv"] {
        let fa = std::fs::read(a.join(file)).unwrap();
        let fb = std::fs::read(b.join(file)).unwrap();
        assert_eq!(fa, fb, "{file} differs across identical synth runs");
    }

    // Bad prevalence flag is a usage error (exit 2).
    let out = Command::new(bin())
        .args(["synth", "--n", "60", "--prevalence", "los_gt3=oops", "--out"])
        .arg(base.join("c"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Unknown task name in a prevalence override.
    let out = Command::new(bin())
        .args(["synth", "--n", "60", "--prevalence", "mortality=0.3", "--out"])
        .arg(base.join("d"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn embed_is_idempotent_per_method() {
    let base = scratch("embed-idem");
    let cohort = base.join("cohort");
    make_cohort(&cohort, 60, 21);
    for method in ["sgns", "fasttext", "pvdm"] {
        let emit = |out: &Path| {
            let res = Command::new(bin())
                .args(["embed", "--method", method, "--dim", "6", "--epochs", "2", "--seed", "5", "--buckets", "64", "--corpus"])
                .arg(cohort.join("entities.csv"))
                .arg("--out")
                .arg(out)
                .output()
                .unwrap();
            assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        };
        let a = base.join(format!("{method}_a.txt"));
        let b = base.join(format!("{method}_b.txt"));
        emit(&a);
        emit(&b);
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "{method} output differs across identical runs"
        );
    }
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn embed_rejects_unknown_method() {
    let base = scratch("embed");
    make_cohort(&base.join("cohort"), 60, 3);
    let out = Command::new(bin())
        .args(["embed", "--method", "glove", "--corpus"])
        .arg(base.join("cohort/entities.csv"))
        .arg("--out")
        .arg(base.join("v.txt"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("glove"));

    // Missing corpus file is a runtime failure (exit 1).
    let out = Command::new(bin())
        .args(["embed", "--method", "sgns", "--corpus"])
        .arg(base.join("missing.csv"))
        .arg("--out")
        .arg(base.join("v.txt"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn run_validates_plan_before_training() {
    let base = scratch("plan");
    let cohort = base.join("cohort");
    make_cohort(&cohort, 60, 5);

    // doc2vec embedding cannot drive the convolutional model; rejected
    // pre-flight with a usage exit code even though no vector file exists.
    let out = Command::new(bin())
        .args([
            "run",
            "--task",
            "in_hospital",
            "--models",
            "proposed",
            "--embeddings",
            "doc2vec",
            "--out",
        ])
        .arg(base.join("out"))
        .arg("--cohort-dir")
        .arg(&cohort)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot be paired"));

    // A word-level model without any embedding is also a usage error.
    let out = Command::new(bin())
        .args([
            "run",
            "--task",
            "in_hospital",
            "--models",
            "averaged",
            "--out",
        ])
        .arg(base.join("out2"))
        .arg("--cohort-dir")
        .arg(&cohort)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Unknown model name.
    let out = Command::new(bin())
        .args([
            "run",
            "--task",
            "in_hospital",
            "--models",
            "transformer",
            "--out",
        ])
        .arg(base.join("out3"))
        .arg("--cohort-dir")
        .arg(&cohort)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // A valid two-cell plan (baseline plus one model/embedding pair) yields a
    // two-row report.
    let vectors = base.join("w2v.txt");
    let embed = Command::new(bin())
        .args(["embed", "--method", "sgns", "--dim", "6", "--epochs", "1", "--corpus"])
        .arg(cohort.join("entities.csv"))
        .arg("--out")
        .arg(&vectors)
        .output()
        .unwrap();
    assert!(embed.status.success());
    let out = Command::new(bin())
        .args([
            "run",
            "--task",
            "in_hospital",
            "--models",
            "gru,proposed",
            "--embeddings",
            "word2vec",
            "--seeds",
            "1",
            "--epochs",
            "2",
            "--patience",
            "1",
            "--hidden-dim",
            "6",
            "--fc-proposed",
            "6",
            "--filters",
            "2,2,2",
            "--kmax",
            "12",
            "--batch-size",
            "16",
            "--word2vec-vectors",
        ])
        .arg(&vectors)
        .arg("--cohort-dir")
        .arg(&cohort)
        .arg("--out")
        .arg(base.join("out4"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let kv = std::fs::read_to_string(base.join("out4/report.kv")).unwrap();
    assert!(kv.contains("rows=2"), "{kv}");
    assert!(kv.contains("row.0.model=gru") && kv.contains("row.1.model=proposed"));
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn config_file_supplies_unset_flags() {
    let base = scratch("config");
    let cohort = base.join("cohort");
    make_cohort(&cohort, 60, 8);
    std::fs::write(
        base.join("run.conf"),
        "seeds=1\nepochs=2\npatience=1\nhidden_dim=6\nfc_baseline=6\nbatch_size=16\n",
    )
    .unwrap();

    // Flags set explicitly on the command line win over the config file:
    // seeds comes from the flag (2), the rest from the config.
    let out = Command::new(bin())
        .args(["run", "--task", "in_hospital", "--models", "gru", "--seeds", "2", "--config"])
        .arg(base.join("run.conf"))
        .arg("--cohort-dir")
        .arg(&cohort)
        .arg("--out")
        .arg(base.join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let kv = std::fs::read_to_string(base.join("out/report.kv")).unwrap();
    assert!(kv.contains("seeds=0,1"), "flag did not win: {kv}");

    // Malformed config line is a usage error.
    std::fs::write(base.join("bad.conf"), "epochs five\n").unwrap();
    let out = Command::new(bin())
        .args(["run", "--task", "in_hospital", "--models", "gru", "--config"])
        .arg(base.join("bad.conf"))
        .arg("--cohort-dir")
        .arg(&cohort)
        .arg("--out")
        .arg(base.join("out4"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&base).ok();
}

#[test]
fn report_renders_and_rejects_malformed_input() {
    let base = scratch("report");
    let cohort = base.join("cohort");
    make_cohort(&cohort, 60, 2);
    let out_dir = base.join("out");
    let run = Command::new(bin())
        .args([
            "run",
            "--task",
            "in_hospital",
            "--models",
            "gru",
            "--seeds",
            "1",
            "--epochs",
            "2",
            "--patience",
            "1",
            "--hidden-dim",
            "6",
            "--batch-size",
            "16",
            "--cohort-dir",
        ])
        .arg(&cohort)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    // Rendering the machine report reproduces the stored table byte for byte.
    let rendered = Command::new(bin())
        .args(["report", "--input"])
        .arg(out_dir.join("report.kv"))
        .output()
        .unwrap();
    assert!(rendered.status.success());
    let stored = std::fs::read(out_dir.join("report.txt")).unwrap();
    assert_eq!(rendered.stdout, stored);
    // Single-seed report renders zero deviations.
    assert!(String::from_utf8_lossy(&rendered.stdout).contains("± 0.000"));

    std::fs::write(base.join("broken.kv"), "# experiment-report v1\nrows=zzz\n").unwrap();
    let bad = Command::new(bin())
        .args(["report", "--input"])
        .arg(base.join("broken.kv"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line"));
    std::fs::remove_dir_all(&base).ok();
}
