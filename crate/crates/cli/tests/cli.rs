use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpm-hybrid"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn pgt_count(dir: &Path) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".pgt"))
        .count()
}

fn same_files(a: &Path, b: &Path) {
    for e in fs::read_dir(a).unwrap() {
        let name = e.unwrap().file_name();
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn simulate_from_scene_config() {
    let dir = tempfile::tempdir().unwrap();
    let scene = mpm_hybrid_scene();
    let cfg = dir.path().join("scene.json");
    fs::write(&cfg, scene).unwrap();
    let run = dir.path().join("run");
    ok(&["simulate", "--config", s(&cfg), "--frames", "10", "--out", s(&run)]);
    assert_eq!(pgt_count(&run), 10);
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 11);
    assert!(metrics.starts_with("frame,phase,refine_iters,residual,div_max,zeta"));
    assert!(run.join("particles.csv").exists());
    assert!(run.join("summary.json").exists());
}

/// A small dam-break written the way a user would.
fn mpm_hybrid_scene() -> &'static str {
    r#"{
        "name": "small_dam",
        "dims": [10, 10, 10],
        "spacing": 0.125,
        "dt": 0.001,
        "fluid": [{"type": "box", "min": [0.125, 0.125, 0.125], "max": [0.5, 0.75, 1.125]}]
    }"#
}

#[test]
fn evaluate_identical_runs_hits_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    ok(&["simulate", "--resolution", "10", "--frames", "4", "--out", s(&a)]);
    let b = dir.path().join("b");
    fs::create_dir(&b).unwrap();
    for e in fs::read_dir(&a).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), b.join(e.file_name())).unwrap();
    }
    let summary = dir.path().join("eval.json");
    let out = ok(&["evaluate", "--truth", s(&a), "--pred", s(&b), "--skip", "0", "--out", s(&summary)]);
    let rows: Vec<&str> = out.lines().skip(1).take(4).collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert_eq!(r.split(',').nth(1), Some("99.0000"), "{r}");
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(summary).unwrap()).unwrap();
    assert_eq!(json["psnr_f"], 99.0);
    assert_eq!(json["per_frame"].as_array().unwrap().len(), 4);
    // the default warm-up skip leaves nothing to average in a short run
    let out = ok(&["evaluate", "--truth", s(&a), "--pred", s(&b)]);
    assert!(out.contains("psnr_f - "), "{out}");
}

#[test]
fn gen_data_train_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen-data", "--out", s(&data), "--templates", "dam_break", "--frames", "6", "--resolution", "12", "--seed", "3",
    ]);
    assert_eq!(pgt_count(&data.join("dam_break_00")), 6);
    let listing = ok(&["inspect", s(&data), "--verify"]);
    assert!(listing.contains("dam_break_00") && listing.contains("verified 6 files"), "{listing}");

    let train = |out: &Path| {
        ok(&[
            "train", "--data", s(&data), "--out", s(out), "--iters", "3", "--batch", "2", "--seed", "7",
        ])
    };
    let (t1, t2) = (dir.path().join("t1"), dir.path().join("t2"));
    train(&t1);
    train(&t2);
    let m1 = fs::read(t1.join("model.mpmw")).unwrap();
    assert_eq!(m1, fs::read(t2.join("model.mpmw")).unwrap());
    assert_eq!(fs::read(t1.join("loss.csv")).unwrap(), fs::read(t2.join("loss.csv")).unwrap());

    let info = ok(&["inspect", s(&t1.join("model.mpmw"))]);
    assert!(info.starts_with("iteration 3, 1139459 parameters"), "{info}");
    let tensor = ok(&["inspect", s(&data.join("dam_break_00/frame_00002.pgt"))]);
    assert!(tensor.starts_with("frame 2 shape"), "{tensor}");

    // a checkpoint drives hybrid simulation
    let run = dir.path().join("hybrid");
    ok(&[
        "simulate", "--resolution", "12", "--frames", "6", "--physical", "4", "--model", s(&t1.join("model.mpmw")), "--out",
        s(&run),
    ]);
    assert_eq!(pgt_count(&run), 6);
    assert!(fs::read_to_string(run.join("metrics.csv")).unwrap().contains("predicted"));
}

#[test]
fn hybrid_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "simulate", "--resolution", "12", "--frames", "10", "--physical", "4", "--predictor", "previous", "--out",
            s(&out),
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    same_files(&a, &b);
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    for line in metrics.lines().skip(1) {
        let residual: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(residual <= 1e-3, "{line}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(cli(&[]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    let out = cli(&["simulate", "--config", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read config"));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(cli(&["train", "--config", s(&bad), "--data", "x"]).status.code(), Some(2));
    assert_eq!(cli(&["--threads", "0", "inspect", "x.pgt"]).status.code(), Some(2));
    assert_eq!(cli(&["simulate", "--frames", "3", "--physical", "1", "--out", s(dir.path())]).status.code(), Some(2));
    assert_eq!(cli(&["inspect", "notes.txt"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["evaluate", "--truth", s(&dir.path().join("nope")), "--pred", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert_eq!(cli(&["train", "--data", s(dir.path())]).status.code(), Some(1));
}

#[test]
fn help_lists_every_subcommand() {
    let out = ok(&["--help"]);
    for cmd in ["gen-data", "train", "simulate", "evaluate", "inspect", "--seed", "--threads", "--config"] {
        assert!(out.contains(cmd), "{cmd}");
    }
}
