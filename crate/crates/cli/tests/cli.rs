use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use toposeg::io::{read_label_png, read_p3f, read_png, write_label_png};
use toposeg::postprocess::connected_components;
use toposeg::LabelMap;

fn toposeg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toposeg")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = toposeg(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, count: usize, seed: u64) {
    ok(&["synth", "--out", p(dir), "--count", &count.to_string(), "--seed", &seed.to_string(), "--width", "96", "--height", "96"]);
}

#[test]
fn synth_is_deterministic_and_documented() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, 3, 40);
    synth(&b, 3, 40);
    for name in ["img_0000.png", "gt_0000.png", "img_0002.png", "gt_0002.png", "phantoms.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let listing = json(&a.join("phantoms.json"));
    assert_eq!(listing[1]["seed"], 41);
    assert_eq!(listing[0]["detached_layer"], "unbroken");
    assert_eq!(listing[1]["detached_layer"], "broken");

    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["subcommand"], "synth");
    assert_eq!(manifest["seeds"], serde_json::json!([40, 41, 42]));
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 7);
    assert!(manifest["timings_ms"]["total"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["flags"]["count"], 3);
    assert!(!a.join("manifest.json.tmp").exists());
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 1, 3);
    let gt = tmp.path().join("gt_0000.png");
    let report = tmp.path().join("report.json");
    let csv = tmp.path().join("report.csv");
    ok(&["eval", "--pred", p(&gt), "--gt", p(&gt), "--report", p(&report), "--csv", p(&csv)]);
    let r = json(&report);
    assert_eq!(r["count"], 1);
    for (key, value) in [("accuracy", 1.0), ("jaccard_sc", 1.0), ("jaccard_le", 1.0), ("mean_contour_distance", 0.0)] {
        assert_eq!(r["mean"][key].as_f64(), Some(value), "{key}");
        assert_eq!(r["images"][0][key].as_f64(), Some(value), "{key}");
    }
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "name,accuracy,jaccard_sc,jaccard_le,mean_contour_distance");
    assert_eq!(lines[2], "mean,1,1,1,0");
}

#[test]
fn batch_eval_aggregate_is_unweighted_mean() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    let truth = LabelMap::from_rows(&["1111", "2222", "3333", "1111"]).unwrap();
    let wrong = LabelMap::from_rows(&["1111", "2222", "2222", "1111"]).unwrap();
    write_label_png(&truth, &gt.join("gt_a.png")).unwrap();
    write_label_png(&truth, &gt.join("gt_b.png")).unwrap();
    write_label_png(&truth, &pred.join("pred_a.png")).unwrap();
    write_label_png(&wrong, &pred.join("pred_b.png")).unwrap();
    let report = tmp.path().join("r.json");
    ok(&["eval", "--pred", p(&pred), "--gt", p(&gt), "--report", p(&report)]);
    let r = json(&report);
    assert_eq!(r["count"], 2);
    let images = r["images"].as_array().unwrap();
    assert_eq!(images[0]["name"], "a");
    assert_eq!(images[1]["accuracy"], 0.75);
    assert_eq!(images[1]["jaccard_le"], 0.0);
    assert_eq!(r["mean"]["accuracy"], 0.875);
    assert_eq!(r["mean"]["jaccard_sc"], 0.75);
    assert_eq!(r["mean"]["jaccard_le"], 0.5);
}

#[test]
fn train_segment_postprocess_overlay_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 4, 100);
    let model = tmp.path().join("model.json");
    let history = tmp.path().join("loss.csv");
    ok(&[
        "train", "--data", p(&data), "--model", p(&model), "--radius", "3", "--epochs", "30", "--seed", "5",
        "--crop-size", "64", "--stride", "32", "--history", p(&history),
    ]);
    let m = json(&model);
    assert_eq!(m["radius"], 3);
    assert_eq!(m["trained"], true);
    assert_eq!(m["trained_on_preprocessed"], true);
    assert_eq!(m["feature_recipe"], "window-stats-v1");
    assert_eq!(m["weights"].as_array().unwrap().len(), 48);
    assert_eq!(fs::read_to_string(&history).unwrap().lines().count(), 31);
    assert!(tmp.path().join("model.json.manifest.json").exists());

    let img = data.join("img_0001.png");
    let pre = tmp.path().join("pre.png");
    ok(&["preprocess", "--in", p(&img), "--out", p(&pre)]);
    let labels = tmp.path().join("labels.png");
    let probs = tmp.path().join("probs.p3f");
    ok(&["segment", "--model", p(&model), "--in", p(&pre), "--labels", p(&labels), "--probs", p(&probs), "--pad-multiple", "16"]);
    let raw = read_label_png(&labels).unwrap();
    assert_eq!(raw.dims(), (96, 96));
    let pm = read_p3f(&probs).unwrap();
    assert_eq!(pm.dims(), (96, 96));
    for y in 0..96 {
        for x in 0..96 {
            let s: f64 = (0..3).map(|k| pm.get(x, y, k)).sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
    }

    let clean = tmp.path().join("clean.png");
    ok(&["postprocess", "--in", p(&labels), "--out", p(&clean)]);
    let clean_map = read_label_png(&clean).unwrap();
    assert!(connected_components(&clean_map, 2).len() <= 1);
    assert!(connected_components(&clean_map, 3).len() <= 1);

    let overlay = tmp.path().join("overlay.png");
    ok(&["overlay", "--image", p(&img), "--labels", p(&clean), "--out", p(&overlay)]);
    let rendered = read_png(&overlay).unwrap();
    let image = read_png(&img).unwrap();
    assert_eq!(rendered.dims(), image.dims());
    assert_eq!(rendered.channels(), 3);
    let (x, y) = (0..96 * 96).map(|i| (i % 96, i / 96)).find(|&(x, y)| clean_map.get(x, y) == 2).unwrap();
    let expect = [255u16, 0, 255];
    for c in 0..3 {
        assert_eq!(rendered.get(x, y, c) as u16, (image.get(x, y, c) as u16 + expect[c] + 1) / 2);
    }

    // The pipeline subcommand chains the same steps.
    let piped = tmp.path().join("piped.png");
    let report = tmp.path().join("piped.json");
    ok(&[
        "pipeline", "--model", p(&model), "--in", p(&img), "--labels", p(&piped), "--gt",
        p(&data.join("gt_0001.png")), "--report", p(&report),
    ]);
    assert_eq!(read_label_png(&piped).unwrap(), clean_map);
    assert!(json(&report)["mean"]["accuracy"].as_f64().unwrap() > 0.5);

    // Directory mode.
    let out_dir = tmp.path().join("batch");
    let batch_report = tmp.path().join("batch.json");
    let imgs = tmp.path().join("imgs");
    fs::create_dir_all(&imgs).unwrap();
    for i in 0..2 {
        fs::copy(data.join(format!("img_000{i}.png")), imgs.join(format!("img_000{i}.png"))).unwrap();
    }
    ok(&["pipeline", "--model", p(&model), "--in", p(&imgs), "--labels", p(&out_dir), "--gt", p(&data), "--report", p(&batch_report)]);
    assert_eq!(json(&batch_report)["count"], 2);
    assert!(out_dir.join("img_0001.png").exists());
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn no_blend_differs_from_blend() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), 1, 9);
    let img = tmp.path().join("img_0000.png");
    let (a, b) = (tmp.path().join("a.png"), tmp.path().join("b.png"));
    ok(&["preprocess", "--in", p(&img), "--out", p(&a)]);
    ok(&["preprocess", "--in", p(&img), "--out", p(&b), "--no-blend"]);
    let (blend, recon, orig) = (read_png(&a).unwrap(), read_png(&b).unwrap(), read_png(&img).unwrap());
    assert_ne!(blend, recon);
    for i in 0..orig.data().len() {
        let (r, o) = (recon.data()[i] as u16, orig.data()[i] as u16);
        assert!(r <= o);
        assert_eq!(blend.data()[i] as u16, (r + o + 1) / 2);
    }
}

#[test]
fn bench_reports_validated_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bench.csv");
    ok(&["bench", "--algo", "naive,sequential,queue", "--width", "96", "--height", "96", "--seed", "2", "--repeat", "3", "--csv", p(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "algo,width,height,repeat,median_ns,validated");
    assert_eq!(lines.len(), 4);
    for (line, algo) in lines[1..].iter().zip(["naive", "sequential", "queue"]) {
        let cols: Vec<_> = line.split(',').collect();
        assert_eq!(cols[0], algo);
        assert_eq!(&cols[1..4], &["96", "96", "3"]);
        assert!(cols[4].parse::<u128>().unwrap() > 0);
        assert_eq!(cols[5], "true");
    }
    let stdout = ok(&["bench", "--algo", "queue", "--width", "96", "--height", "96", "--repeat", "1"]).stdout;
    assert!(String::from_utf8(stdout).unwrap().starts_with("algo,width"));
}

#[test]
fn exit_codes() {
    assert_eq!(toposeg(&[]).status.code(), Some(2));
    assert_eq!(toposeg(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(toposeg(&["bench", "--repeat", "0"]).status.code(), Some(2));
    assert_eq!(toposeg(&["bench", "--algo", "magic"]).status.code(), Some(2));
    assert_eq!(toposeg(&["--help"]).status.code(), Some(0));

    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.png");
    let out = toposeg(&["postprocess", "--in", p(&missing), "--out", p(&tmp.path().join("o.png"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.png"));

    let model = tmp.path().join("model.json");
    fs::write(&model, "{}").unwrap();
    let out = toposeg(&["segment", "--model", p(&model), "--in", p(&missing), "--labels", p(&tmp.path().join("l.png"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.json"));

    let zero = tmp.path().join("zero.png");
    write_label_png(&LabelMap::filled(4, 4, 1).unwrap(), &zero).unwrap();
    let bad = tmp.path().join("bad.png");
    write_label_png(&LabelMap::from_rows(&["1101", "1111"]).unwrap(), &bad).unwrap();
    let out = toposeg(&["eval", "--pred", p(&bad), "--gt", p(&zero), "--report", p(&tmp.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.png"));
}
