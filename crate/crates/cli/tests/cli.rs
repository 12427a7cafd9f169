use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use manifold_mtf::data::{generate_synthetic, mtx, save_dataset, write_labels, MultiAspectDataset, SyntheticSpec};
use manifold_mtf::linalg::DenseMatrix;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_manifold-mtf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    cli(args).status.code().expect("exited normally")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn synth(dir: &Path, noise: &str) -> String {
    ok(&[
        "synth", "--types", "3", "--sizes", "40,30,35", "--clusters", "3", "--noise", noise,
        "--seed", "3", "--out", &s(dir),
    ]);
    s(&dir.join("manifest.json"))
}

fn csv_rows(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

#[test]
fn exit_codes() {
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["synth", "--types", "3", "--sizes", "20"]), 2);
    assert_eq!(code(&["synth", "--types", "1", "--sizes", "20", "--clusters", "2"]), 2);
    assert_eq!(code(&["synth", "--types", "3", "--sizes", "20,20", "--clusters", "2"]), 2);
    assert_eq!(code(&["cluster", "--manifest", "/nonexistent/manifest.json"]), 1);

    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("data"), "0.1");
    let out = s(&tmp.path().join("run"));
    assert_eq!(code(&["cluster", "--manifest", &manifest, "--lambda", "-1", "--out", &out]), 2);
    assert_eq!(code(&["sweep", "--manifest", &manifest, "--ps", "5:x"]), 2);
    assert_eq!(code(&["scale", "--schedule", "1,0"]), 2);

    let a = tmp.path().join("a.txt");
    let b = tmp.path().join("b.txt");
    write_labels(&a, &[0, 1, 1]).unwrap();
    write_labels(&b, &[0, 1]).unwrap();
    assert_eq!(code(&["eval", "--pred", &s(&a), "--truth", &s(&b)]), 1);
}

#[test]
fn synth_writes_manifest_relations_and_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("data");
    synth(&dir, "0.1");
    let names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"manifest.json".to_string()));
    assert_eq!(names.iter().filter(|n| n.ends_with(".mtx")).count(), 3);
    let r = mtx::read_sparse(dir.join("r_0_2.mtx")).unwrap();
    assert_eq!(r.shape(), (40, 35));
}

#[test]
fn cluster_recovers_noiseless_data_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("data"), "0");
    let out = tmp.path().join("run");
    ok(&["cluster", "--manifest", &manifest, "--out", &s(&out), "--dump-factors"]);

    let metrics = csv_rows(&std::fs::read_to_string(out.join("metrics.csv")).unwrap());
    assert_eq!(metrics.len(), 3);
    for row in &metrics {
        assert_eq!(row["ac"].parse::<f64>().unwrap(), 1.0, "{row:?}");
    }
    for (h, n) in [40, 30, 35].into_iter().enumerate() {
        let labels = std::fs::read_to_string(out.join(format!("labels_{h}.txt"))).unwrap();
        assert_eq!(labels.lines().count(), n);
        let g = mtx::read_dense(out.join(format!("factors/g_{h}.mtx"))).unwrap();
        assert_eq!(g.shape(), (n, 3));
    }
    assert!(out.join("factors/s_0_1.mtx").exists());
    let config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["solver"]["clusters"], 3);
}

#[test]
fn zero_delta_and_zero_iterations() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("data"), "0.1");

    let out = tmp.path().join("ablation");
    ok(&["cluster", "--manifest", &manifest, "--out", &s(&out), "--delta", "0", "--max-iters", "30"]);
    let trace = csv_rows(&std::fs::read_to_string(out.join("trace.csv")).unwrap());
    assert!(trace.len() > 1);
    assert!(trace.iter().all(|r| r["inter"].parse::<f64>().unwrap() == 0.0));

    let out = tmp.path().join("init");
    ok(&["cluster", "--manifest", &manifest, "--out", &s(&out), "--max-iters", "0"]);
    let trace = csv_rows(&std::fs::read_to_string(out.join("trace.csv")).unwrap());
    assert_eq!(trace.len(), 1);
    assert_eq!(trace[0]["iter"], "0");
}

#[test]
fn eval_scores_permuted_labels_and_cohesiveness() {
    let tmp = tempfile::tempdir().unwrap();
    let pred = tmp.path().join("pred.txt");
    let truth = tmp.path().join("truth.txt");
    write_labels(&pred, &[2, 2, 0, 0, 1, 1]).unwrap();
    write_labels(&truth, &[0, 0, 1, 1, 2, 2]).unwrap();
    let shown = ok(&["eval", "--pred", &s(&pred), "--truth", &s(&truth)]);
    assert!(shown.contains("ac=1.000000"), "{shown}");

    write_labels(&pred, &[0, 0, 1]).unwrap();
    write_labels(&truth, &[0, 0, 1]).unwrap();
    let features = tmp.path().join("features.mtx");
    let rows = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]).unwrap();
    mtx::write_dense(&features, &rows).unwrap();
    let csv = tmp.path().join("scores.csv");
    for _ in 0..2 {
        ok(&["eval", "--pred", &s(&pred), "--truth", &s(&truth), "--features", &s(&features), "--csv", &s(&csv)]);
    }
    let rows = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 2);
    let c: f64 = rows[0]["cohesiveness"].parse().unwrap();
    assert!((c - 1.25).abs() < 1e-12, "{c}");
}

fn one_labeled_type(dir: &Path) -> String {
    let ds = generate_synthetic(&SyntheticSpec {
        sizes: vec![30, 25, 20],
        clusters: 2,
        block_strength: 1.0,
        noise: 0.1,
        sparsity: 0.5,
        seed: 5,
    })
    .unwrap();
    let relations = ds.relations().clone();
    let truth = ds.truth()[&1].clone();
    let ds = MultiAspectDataset::new(ds.sizes().to_vec(), relations)
        .unwrap()
        .with_truth(1, truth)
        .unwrap();
    s(&save_dataset(&ds, dir).unwrap())
}

#[test]
fn sweep_rows_cover_every_seed_and_a_mean() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = one_labeled_type(&tmp.path().join("data"));
    let text = ok(&[
        "sweep", "--manifest", &manifest, "--delta-ratios", "0.1,1", "--seeds", "0:2", "--clusters", "2",
    ]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 2 * 3 + 2);
    assert!(rows.iter().all(|r| r["type"] == "1"));
    let means: Vec<_> = rows.iter().filter(|r| r["seed"] == "mean").collect();
    assert_eq!(means.len(), 2);
    let seeds: Vec<f64> = rows[..3].iter().map(|r| r["nmi"].parse().unwrap()).collect();
    let mean: f64 = means[0]["nmi"].parse().unwrap();
    assert!((mean - seeds.iter().sum::<f64>() / 3.0).abs() < 1e-12);
}

#[test]
fn single_point_sweep_matches_cluster() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("data"), "0.2");
    let out = tmp.path().join("run");
    ok(&["cluster", "--manifest", &manifest, "--out", &s(&out), "--seed", "1", "--lambda", "1"]);
    let cluster = csv_rows(&std::fs::read_to_string(out.join("metrics.csv")).unwrap());
    let sweep = csv_rows(&ok(&["sweep", "--manifest", &manifest, "--seeds", "1", "--lambdas", "1"]));
    for c in &cluster {
        let row = sweep
            .iter()
            .find(|r| r["seed"] == "1" && r["type"] == c["type"])
            .expect("row per type");
        assert_eq!(row["nmi"], c["nmi"]);
        assert_eq!(row["ac"], c["ac"]);
    }
}

#[test]
fn sweep_reports_failed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("data"), "0.1");
    let text = ok(&["sweep", "--manifest", &manifest, "--clusters", "50", "--seeds", "0:1"]);
    let lines: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(lines, ["10,0.1,5,0,failed,,,,", "10,0.1,5,1,failed,,,,", "10,0.1,5,mean,failed,,,,"]);
}

#[test]
fn scale_reports_one_row_per_multiplier() {
    let text = ok(&["scale", "--sizes", "40", "--clusters", "3", "--iters", "2", "--repeats", "1"]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    let sizes: Vec<&str> = rows.iter().map(|r| r["sizes"].as_str()).collect();
    assert_eq!(sizes, ["40;40;40", "80;40;40", "160;40;40"]);
    for r in &rows {
        for key in ["graph_secs", "iter_secs", "graph_plus_iter_secs"] {
            assert!(r[key].parse::<f64>().unwrap() > 0.0, "{key} in {r:?}");
        }
        assert!(r["memory_bytes"].parse::<usize>().unwrap() > 0);
    }
}
