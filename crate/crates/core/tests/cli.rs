use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lensdepth::datasets::features::save_features;
use lensdepth::datasets::{load_features, two_moons, FeatureFormat};
use lensdepth::depth::{fit, ReductionStrategy, StrategyKind};
use lensdepth::eval::{auroc, EvalReport};
use lensdepth::PointSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lensdepth(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lensdepth"))
        .args(args)
        .current_dir(dir)
        .env_remove("LD_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = lensdepth(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_score_column(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn generate_writes_labeled_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--kind", "moons", "--n", "1000", "--noise", "0.07", "--seed", "1", "--out", "moons.bin"]);
    let m = load_features(&d.join("moons.bin")).unwrap();
    assert_eq!((m.len(), m.dim()), (1000, 2));
    assert_eq!(m.class_ids().unwrap(), vec![0, 1]);
    assert_eq!(m, two_moons(1000, 0.07, 1).unwrap());
    assert!(d.join("moons.bin.config.json").exists());

    ok(d, &["generate", "--kind", "spiral", "--n", "1000", "--out", "spiral.csv"]);
    let s = load_features(&d.join("spiral.csv")).unwrap();
    assert_eq!((s.len(), s.dim()), (1000, 2));

    let stdout = ok(d, &["generate", "--kind", "gaussians3", "--n", "4"]).stdout;
    let text = String::from_utf8(stdout).unwrap();
    assert!(text.starts_with("f0,f1,label\n"));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(lensdepth(d, &["generate", "--n", "10"]).status.code(), Some(1));
    assert_eq!(lensdepth(d, &["generate", "--kind", "torus"]).status.code(), Some(1));
    ok(d, &["generate", "--kind", "moons", "--n", "40", "--out", "m.csv"]);
    let out = lensdepth(d, &["fit", "--features", "m.csv", "--alpha", "0.5", "--out", "model"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
    let out = lensdepth(d, &["fit", "--features", "m.csv", "--strategy", "kmean-center", "--out", "model"]);
    assert_eq!(out.status.code(), Some(1));
    let out = lensdepth(d, &["fit", "--features", "missing.csv", "--out", "model"]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(d.join("nan.csv"), "f0,f1,label\n0,0,0\n1,NaN,0\n").unwrap();
    let out = lensdepth(d, &["fit", "--features", "nan.csv", "--out", "model"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1, column 1"));

    fs::write(d.join("unlabeled.csv"), "f0,f1\n0,0\n1,1\n").unwrap();
    assert_eq!(lensdepth(d, &["fit", "--features", "unlabeled.csv", "--out", "model"]).status.code(), Some(1));
}

#[test]
fn fit_and_score_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--kind", "moons", "--n", "300", "--seed", "1", "--out", "train.csv"]);
    let out = ok(d, &["fit", "--features", "train.csv", "--alpha", "7", "--out", "model"]);
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("class 0: m = 150") && log.contains("class 1: m = 150"), "{log}");
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("model/model.json")).unwrap()).unwrap();
    assert_eq!(meta["class_ids"], serde_json::json!([0, 1]));
    assert_eq!(meta["config"]["alpha"], 7.0);
    assert_eq!(meta["prng"], "chacha8");

    ok(d, &["score", "--model", "model", "--features", "train.csv", "--out", "train_scores.csv"]);
    let train_scores = read_score_column(&d.join("train_scores.csv"));
    assert_eq!(train_scores.len(), 300);
    assert!(fs::read_to_string(d.join("train_scores.csv")).unwrap().starts_with("row,score\n0,"));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut far = Vec::new();
    for _ in 0..200 {
        let (r, t) = (rng.random_range(3.0..6.0), rng.random_range(0.0..std::f64::consts::TAU));
        far.extend([0.5 + r * t.cos(), 0.25 + r * t.sin()]);
    }
    save_features(&d.join("far.csv"), &PointSet::new(far, 200, 2).unwrap(), FeatureFormat::Csv).unwrap();
    ok(d, &["score", "--model", "model", "--features", "far.csv", "--out", "far_scores.csv"]);
    let far_scores = read_score_column(&d.join("far_scores.csv"));
    assert!(median(train_scores) > median(far_scores));

    fs::write(d.join("empty.csv"), "f0,f1\n").unwrap();
    let out = ok(d, &["score", "--model", "model", "--features", "empty.csv"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "row,score\n");

    fs::write(d.join("wide.csv"), "f0,f1,f2\n1,2,3\n").unwrap();
    let out = lensdepth(d, &["score", "--model", "model", "--features", "wide.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}

#[test]
fn kmean_center_fit_uses_requested_inner_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--kind", "spiral", "--n", "1000", "--seed", "2", "--out", "spiral.bin"]);
    let out = ok(d, &[
        "fit", "--features", "spiral.bin", "--strategy", "kmean-center", "--n-inner", "200", "--seed", "3",
        "--out", "model",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("class 0: m = 200"));
}

fn write_scores(path: &Path, scores: &[f64], correct: Option<&[bool]>) {
    let mut s = String::from(if correct.is_some() { "row,score,correct\n" } else { "row,score\n" });
    for (i, v) in scores.iter().enumerate() {
        match correct {
            Some(c) => s.push_str(&format!("{i},{v:?},{}\n", c[i] as u8)),
            None => s.push_str(&format!("{i},{v:?}\n")),
        }
    }
    fs::write(path, s).unwrap();
}

fn eval_json(d: &Path, args: &[&str]) -> serde_json::Value {
    serde_json::from_slice(&ok(d, args).stdout).unwrap()
}

#[test]
fn eval_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_scores(&d.join("id.csv"), &[0.9, 0.8, 0.7], None);
    write_scores(&d.join("ood.csv"), &[0.1, 0.2], None);
    let r = eval_json(d, &["eval", "--id", "id.csv", "--ood", "ood.csv", "--steps", "5"]);
    assert_eq!(r["auroc"], 1.0);
    assert_eq!(r["n_id"], 3);
    assert_eq!(r["n_ood"], 2);
    assert_eq!(r["curve"].as_array().unwrap().len(), 5);
    assert_eq!(r["config"]["steps"], 5);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let id: Vec<f64> = (0..300).map(|_| (rng.random_range(0..50) as f64) / 50.0).collect();
    let ood: Vec<f64> = (0..200).map(|_| (rng.random_range(0..35) as f64) / 50.0).collect();
    let correct: Vec<bool> = (0..300).map(|_| rng.random_bool(0.8)).collect();
    write_scores(&d.join("mid.csv"), &id, Some(&correct));
    write_scores(&d.join("mood.csv"), &ood, None);
    ok(d, &["eval", "--id", "mid.csv", "--ood", "mood.csv", "--out", "report.json"]);
    let got: EvalReport = serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    let want = EvalReport::compute(&id, Some(&correct), &ood, 100).unwrap();
    assert_eq!(got.auroc, want.auroc);
    assert_eq!(got.curve, want.curve);
    assert_eq!((got.n_id, got.n_ood), (300, 200));

    let swapped = eval_json(d, &["eval", "--id", "mood.csv", "--ood", "mid.csv"]);
    assert_eq!(swapped["auroc"].as_f64().unwrap() + got.auroc, 1.0);

    fs::write(d.join("none.csv"), "row,score\n").unwrap();
    assert_eq!(lensdepth(d, &["eval", "--id", "none.csv", "--ood", "ood.csv"]).status.code(), Some(1));
}

#[test]
fn grid_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--kind", "moons", "--n", "200", "--seed", "1", "--out", "m.csv"]);
    ok(d, &["fit", "--features", "m.csv", "--out", "model"]);

    let out = ok(d, &[
        "grid", "--model", "model", "--resolution", "2", "--xmin", "-1", "--xmax", "1", "--ymin", "-1", "--ymax", "1",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y,score");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("-0.5,-0.5,"));

    let args = [
        "grid", "--model", "model", "--resolution", "40", "--xmin", "-1.5", "--xmax", "2.5", "--ymin", "-1",
        "--ymax", "1.5", "--out", "g1.csv",
    ];
    ok(d, &args);
    let first = fs::read(d.join("g1.csv")).unwrap();
    ok(d, &args);
    assert_eq!(first, fs::read(d.join("g1.csv")).unwrap());

    // cells near the training points beat the corners
    let train = load_features(&d.join("m.csv")).unwrap();
    let rows: Vec<(f64, f64, f64)> = String::from_utf8(first)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect();
    let (mut on, mut corner) = (Vec::new(), Vec::new());
    for &(x, y, s) in &rows {
        let near = train.rows().any(|r| (r[0] - x).hypot(r[1] - y) < 0.05);
        if near {
            on.push(s);
        }
        if (x < -1.2 || x > 2.2) && (y < -0.7 || y > 1.2) {
            corner.push(s);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(!on.is_empty() && !corner.is_empty());
    assert!(mean(&on) > mean(&corner));
    assert!(corner.iter().all(|&s| s == 0.0));

    let out = lensdepth(d, &["grid", "--method", "euclid", "--train", "m.csv", "--resolution", "3"]);
    assert!(out.status.success());
    fs::write(d.join("wide.csv"), "f0,f1,f2,label\n1,2,3,0\n2,2,2,0\n").unwrap();
    assert_eq!(
        lensdepth(d, &["grid", "--method", "euclid", "--train", "wide.csv"]).status.code(),
        Some(1)
    );
}

#[test]
fn reduce_bench_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--kind", "moons", "--n", "300", "--seed", "1", "--out", "train.bin"]);
    ok(d, &["generate", "--kind", "moons", "--n", "100", "--seed", "2", "--out", "id.bin"]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ood: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..4.0)).collect();
    save_features(&d.join("ood.bin"), &PointSet::new(ood, 100, 2).unwrap(), FeatureFormat::Binary).unwrap();

    let out = ok(d, &[
        "reduce-bench", "--features", "train.bin", "--id", "id.bin", "--ood", "ood.bin", "--sizes", "30,60,90",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "strategy,30,60,90");
    assert_eq!(lines.len(), 4);
    for (line, name) in lines[1..].iter().zip(["random", "kmean-center", "kmean-center-plus"]) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], name);
        assert_eq!(cells.len(), 4);
        assert!(cells[1..].iter().all(|c| (0.0..=1.0).contains(&c.parse::<f64>().unwrap())));
    }

    let out = ok(d, &[
        "reduce-bench", "--features", "train.bin", "--id", "id.bin", "--ood", "ood.bin", "--strategies",
        "kmean-center", "--sizes", "40", "--seed", "7",
    ]);
    let cell: f64 = String::from_utf8(out.stdout).unwrap().lines().nth(1).unwrap()
        .split(',').nth(1).unwrap().parse().unwrap();
    let train = load_features(&d.join("train.bin")).unwrap();
    let model = fit(&train, 7.0, ReductionStrategy::new(StrategyKind::KmeanCenter, 40, 7), false).unwrap();
    let manual = auroc(
        &model.score_batch(&load_features(&d.join("id.bin")).unwrap()).unwrap(),
        &model.score_batch(&load_features(&d.join("ood.bin")).unwrap()).unwrap(),
    )
    .unwrap();
    assert_eq!(cell, manual);

    let out = lensdepth(d, &[
        "reduce-bench", "--features", "train.bin", "--id", "id.bin", "--ood", "ood.bin", "--strategies", "kmeans",
        "--sizes", "40",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn baseline_methods() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--kind", "gaussians3", "--n", "30", "--seed", "1", "--out", "g.csv"]);
    fs::write(d.join("q.csv"), "f0,f1\n0,5.773502691896258\n100,100\n").unwrap();
    for method in ["euclid", "mahalanobis", "euclid-ld", "ld"] {
        let out = ok(d, &["baseline", "--method", method, "--train", "g.csv", "--features", "q.csv"]);
        let text = String::from_utf8(out.stdout).unwrap();
        let s: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(s.len(), 2, "{method}");
        assert!(s[0] > s[1], "{method}: {s:?}");
    }
    assert_eq!(
        lensdepth(d, &["baseline", "--method", "knn", "--train", "g.csv", "--features", "q.csv"]).status.code(),
        Some(1)
    );
    ok(d, &["baseline", "--method", "knn", "--k", "3", "--train", "g.csv", "--features", "q.csv"]);

    fs::write(d.join("p.csv"), "p0,p1,p2\n1,0,0\n0.2,0.3,0.5\n").unwrap();
    let out = ok(d, &["baseline", "--method", "entropy", "--features", "p.csv", "--out", "e.csv"]);
    assert!(out.stdout.is_empty());
    let e = read_score_column(&d.join("e.csv"));
    assert_eq!(e[0], 0.0);
    assert!(e[1] < 0.0);
    fs::write(d.join("bad.csv"), "p0,p1\n-0.5,1.5\n").unwrap();
    assert_eq!(
        lensdepth(d, &["baseline", "--method", "entropy", "--features", "bad.csv"]).status.code(),
        Some(1)
    );
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.json"), r#"{"n": 12, "seed": 4}"#).unwrap();
    ok(d, &["generate", "--kind", "moons", "--n", "500", "--config", "cfg.json", "--out", "a.csv"]);
    assert_eq!(load_features(&d.join("a.csv")).unwrap(), two_moons(12, 0.07, 4).unwrap());

    // the echoed config reproduces the run, output path included
    let first = fs::read(d.join("a.csv")).unwrap();
    let echoed: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("a.csv.config.json")).unwrap()).unwrap();
    assert_eq!(echoed["kind"], "moons");
    assert_eq!(echoed["out"], "a.csv");
    fs::copy(d.join("a.csv.config.json"), d.join("echo.json")).unwrap();
    fs::remove_file(d.join("a.csv")).unwrap();
    ok(d, &["generate", "--kind", "spiral", "--config", "echo.json"]);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), first);

    fs::write(d.join("bad.json"), r#"{"nn": 12}"#).unwrap();
    let out = lensdepth(d, &["generate", "--kind", "moons", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key 'nn'"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--kind", "moons", "--n", "120", "--seed", "3", "--out", "m.csv"]);
    ok(d, &["fit", "--features", "m.csv", "--out", "model"]);
    let one = ok(d, &["--threads", "1", "score", "--model", "model", "--features", "m.csv"]).stdout;
    let four = Command::new(env!("CARGO_BIN_EXE_lensdepth"))
        .args(["score", "--model", "model", "--features", "m.csv"])
        .current_dir(d)
        .env("LD_THREADS", "4")
        .output()
        .unwrap();
    assert!(four.status.success());
    assert_eq!(one, four.stdout);
}
