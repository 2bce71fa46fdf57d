use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mlpvo::dataset::parse_records;

const BIN: &str = env!("CARGO_BIN_EXE_mlpvo");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "dataset_records = 600\nframes = 4\nstatic_points = 300\n";

fn gen_small(dir: &Path, extra: &str, seed: &str) -> std::path::PathBuf {
    let cfg = dir.join(format!("gen{seed}.cfg"));
    fs::write(&cfg, format!("{SMALL}{extra}")).unwrap();
    let out = dir.join(format!("scene{seed}"));
    ok(&["gen", "--config", s(&cfg), "--seed", seed, "--out", s(&out)]);
    out
}

#[test]
fn gen_writes_a_parseable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_small(dir.path(), "", "1");
    let text = fs::read(scene.join("dataset.csv")).unwrap();
    let records = parse_records(&text[..]).unwrap();
    assert_eq!(records.len(), 600);
    for name in ["records.csv", "boxes.txt", "groundtruth.txt", "config.resolved"] {
        assert!(scene.join(name).is_file(), "{name} missing");
    }
    let resolved = fs::read_to_string(scene.join("config.resolved")).unwrap();
    assert!(resolved.starts_with("seed = 1\n"));
    assert!(resolved.contains("frames = 4\n"));
}

#[test]
fn gen_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["gen", "--config", s(&cfg), "--seed", "7", "--out", s(&a)]);
    ok(&["gen", "--config", s(&cfg), "--seed", "7", "--out", s(&b)]);
    for name in ["dataset.csv", "records.csv", "boxes.txt", "groundtruth.txt", "config.resolved"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn zero_dynamic_fraction_gives_static_labels() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_small(dir.path(), "dynamic_fraction = 0\n", "2");
    for name in ["dataset.csv", "records.csv"] {
        let records = parse_records(&fs::read(scene.join(name)).unwrap()[..]).unwrap();
        assert!(!records.is_empty());
        assert!(records.iter().all(|r| r.class == 0), "{name}");
    }
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--dataset", s(&dir.path().join("absent.csv")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "frames = 1\n").unwrap();
    let out = run(&["gen", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = run(&["train", "--dataset", "x", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

fn history_losses(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn train_loss_decreases_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_small(dir.path(), "", "3");
    let data = scene.join("dataset.csv");
    let args = |out: &Path| {
        vec![
            "train".to_string(),
            "--dataset".into(),
            s(&data).into(),
            "--out".into(),
            s(out).into(),
            "--epochs".into(),
            "15".into(),
            "--milestones".into(),
            "8,12".into(),
            "--lr".into(),
            "0.01".into(),
        ]
    };
    let a = dir.path().join("ta");
    let b = dir.path().join("tb");
    let aa = args(&a);
    ok(&aa.iter().map(String::as_str).collect::<Vec<_>>());
    let bb = args(&b);
    ok(&bb.iter().map(String::as_str).collect::<Vec<_>>());
    let losses = history_losses(&a.join("history.csv"));
    assert_eq!(losses.len(), 15);
    assert!(losses[14] < losses[0], "{losses:?}");
    assert_eq!(fs::read(a.join("model.txt")).unwrap(), fs::read(b.join("model.txt")).unwrap());
    let resolved = fs::read_to_string(a.join("config.resolved")).unwrap();
    assert!(resolved.contains("milestones = 8,12\n"));
    assert!(resolved.contains("learning_rate = 0.01\n"));
}

#[test]
fn eval_reports_bounded_scores() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_small(dir.path(), "", "4");
    let data = scene.join("dataset.csv");
    let model = dir.path().join("m");
    ok(&["train", "--dataset", s(&data), "--out", s(&model), "--epochs", "5", "--milestones", "3"]);
    let out = dir.path().join("e");
    let stdout = ok(&["eval", "--dataset", s(&data), "--model", s(&model.join("model.txt")), "--out", s(&out)]).stdout;
    assert!(String::from_utf8_lossy(&stdout).contains("MLP"));
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "method,accuracy,precision,recall,f1");
    assert_eq!(rows.len(), 5);
    for row in &rows[1..] {
        for v in row.split(',').skip(1) {
            let v: f64 = v.parse().unwrap();
            assert!((0.0..=1.0).contains(&v), "{row}");
        }
    }
    let report = ok(&["report", s(&out.join("metrics.csv"))]).stdout;
    assert!(String::from_utf8_lossy(&report).lines().count() == 6);
}

fn ate_rows(path: &Path) -> Vec<(String, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().parse().unwrap())
        })
        .collect()
}

#[test]
fn static_scene_variants_agree() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_small(dir.path(), "moving_objects = 0\ndynamic_fraction = 0\n", "5");
    let labeled = gen_small(dir.path(), "", "6");
    let model = dir.path().join("m");
    ok(&["train", "--dataset", s(&labeled.join("dataset.csv")), "--out", s(&model), "--epochs", "3", "--milestones", "1"]);
    let out = dir.path().join("vo");
    ok(&["vo", "--scene", s(&scene), "--model", s(&model.join("model.txt")), "--out", s(&out)]);
    let rows = ate_rows(&out.join("ate.csv"));
    let names: Vec<&str> = rows.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["pipeline", "naive", "oracle"]);
    for (_, e) in &rows[1..] {
        assert!((e - rows[0].1).abs() < 1e-6, "{rows:?}");
    }
    for name in ["trajectory_pipeline.txt", "trajectory_naive.txt", "trajectory_oracle.txt", "diagnostics.csv"] {
        assert!(out.join(name).is_file());
    }
}
