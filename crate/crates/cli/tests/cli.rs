//! End-to-end runs of the `rrq` binary.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::Path;
use std::process::{Command, Output};

use rand::Rng;

use rrq_core::features::{read_features, write_features, FeatureExtractor};
use rrq_core::lstm::{LstmModel, LstmParams, NormStats};
use rrq_core::metric::Metric;
use rrq_core::video_io::write_y4m;
use rrq_core::save_model;

use support::{header, random_segment, rng};

fn rrq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrq"))
        .args(args)
        .output()
        .expect("rrq binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a 64x32 Y4M clip of `frames` frames at 30 fps.
fn write_clip(path: &Path, frames: usize, seed: u64) {
    let seg = random_segment(&mut rng(seed), 64, 32, frames);
    let mut bytes = Vec::new();
    write_y4m(&seg, &mut bytes).unwrap();
    std::fs::write(path, bytes).unwrap();
}

/// Two-stage VMAF model over `steps` chunks with small random weights.
fn write_model(path: &Path, steps: usize) {
    let mut rng = rng(11);
    let width = 5;
    let len = LstmParams::len_for(8, width);
    let params = LstmParams::from_vec(8, width, (0..len).map(|_| rng.gen_range(-0.3..0.3)).collect()).unwrap();
    let model = LstmModel::new(header(Metric::Vmaf, 2, steps), NormStats::identity(width), params).unwrap();
    save_model(&model, path).unwrap();
}

#[test]
fn analyze_four_seconds_gives_eight_chunks() {
    let dir = tempfile::tempdir().unwrap();
    let clip = dir.path().join("clip.y4m");
    let csv = dir.path().join("clip.csv");
    write_clip(&clip, 120, 1);
    let run = rrq(&["analyze", path_str(&clip), "-o", path_str(&csv)]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(stdout(&run).contains("-> 8 chunks"), "{}", stdout(&run));

    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.starts_with("segment_id,chunk_index,E,h,L"));
    assert!(dir.path().join("clip.json").exists());
    let f = read_features(&csv).unwrap();
    assert_eq!(f.segment_id, "clip");
    assert_eq!(f.chunk_count(), 8);
}

#[test]
fn analyze_without_output_writes_csv_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let clip = dir.path().join("short.y4m");
    write_clip(&clip, 20, 2);
    let run = rrq(&["analyze", path_str(&clip), "--segment-id", "abc#001"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let text = stdout(&run);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("abc#001,1,"));
    assert!(rows[2].starts_with("abc#001,2,"));
}

#[test]
fn raw_i420_matches_y4m() {
    let dir = tempfile::tempdir().unwrap();
    let seg = random_segment(&mut rng(3), 64, 32, 30);
    let mut y4m = Vec::new();
    write_y4m(&seg, &mut y4m).unwrap();
    let mut raw = Vec::new();
    for frame in seg.frames() {
        raw.extend_from_slice(frame.samples());
        raw.extend(std::iter::repeat_n(128u8, 2 * 32 * 16));
    }
    let (a, b) = (dir.path().join("a.y4m"), dir.path().join("a.yuv"));
    std::fs::write(&a, y4m).unwrap();
    std::fs::write(&b, raw).unwrap();

    let from_y4m = rrq(&["analyze", path_str(&a)]);
    let from_raw = rrq(&["analyze", path_str(&b), "--width", "64", "--height", "32"]);
    assert!(from_raw.status.success(), "{}", stderr(&from_raw));
    assert_eq!(stdout(&from_y4m), stdout(&from_raw));

    let missing = rrq(&["analyze", path_str(&b)]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("--width"));
}

#[test]
fn predict_from_features_and_video_agree() {
    let dir = tempfile::tempdir().unwrap();
    let clip = dir.path().join("seg.y4m");
    let csv = dir.path().join("seg.csv");
    let model = dir.path().join("model.json");
    write_clip(&clip, 30, 4);
    write_model(&model, 2);
    let seg = random_segment(&mut rng(4), 64, 32, 30);
    let f = FeatureExtractor::new(32, 15).unwrap().extract("seg", &seg).unwrap();
    write_features(&f, &csv).unwrap();

    let by_features = rrq(&["predict", "--features", path_str(&csv), "--chain", "16.8,2.4", "--model", path_str(&model)]);
    assert!(by_features.status.success(), "{}", stderr(&by_features));
    let text = stdout(&by_features);
    let first = text.lines().next().unwrap();
    let value: f64 = first.strip_prefix("VMAF ").expect(first).parse().unwrap();
    assert!(value.is_finite());

    let json = |flag: &str, path: &Path| {
        let run = rrq(&["--json", "predict", flag, path_str(path), "--chain", "16.8,2.4", "--model", path_str(&model)]);
        assert!(run.status.success(), "{}", stderr(&run));
        let v: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
        assert_eq!(v["metric"], "VMAF");
        v["value"].as_f64().unwrap()
    };
    let (a, b) = (json("--features", &csv), json("--video", &clip));
    assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
}

#[test]
fn predict_rejects_chain_of_wrong_length() {
    let dir = tempfile::tempdir().unwrap();
    let clip = dir.path().join("seg.y4m");
    let model = dir.path().join("model.json");
    write_clip(&clip, 30, 5);
    write_model(&model, 2);
    let run = rrq(&["predict", "--video", path_str(&clip), "--chain", "16.8", "--model", path_str(&model)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(run.stdout.is_empty());
    assert!(stderr(&run).starts_with("error: ChainModelMismatch"), "{}", stderr(&run));

    let run = rrq(&["--json", "predict", "--video", path_str(&clip), "--chain", "16.8", "--model", path_str(&model)]);
    assert_eq!(run.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&run.stderr).unwrap();
    assert_eq!(v["error"], "ChainModelMismatch");
}

#[test]
fn latency_sums_encode_decode_and_features() {
    let run = rrq(&["latency", "--encode", "1.0", "--decode", "0.2", "--feature", "0.323"]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert_eq!(stdout(&run).trim(), "1.846");

    let run = rrq(&["--json", "latency", "--encode", "1.0,0.5", "--decode", "0.2,0.1", "--feature", "0.323"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let v: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(v["M"], 2);
}

#[test]
fn usage_errors_exit_two() {
    for args in [&["transmogrify"][..], &["latency", "--encode", "1.0"], &["analyze"]] {
        let run = rrq(args);
        assert_eq!(run.status.code(), Some(2), "{args:?}");
        assert!(run.stdout.is_empty(), "{args:?}");
    }
    assert!(rrq(&["--help"]).status.success());
}

#[test]
fn missing_files_are_domain_errors() {
    let run = rrq(&["analyze", "/nonexistent/clip.y4m"]);
    assert_eq!(run.status.code(), Some(1));
    assert!(run.stdout.is_empty());
    assert!(stderr(&run).starts_with("error: "), "{}", stderr(&run));

    let run = rrq(&["predict", "--features", "/nonexistent.csv", "--chain", "16.8", "--model", "/nonexistent.json"]);
    assert_eq!(run.status.code(), Some(1));
    assert!(run.stdout.is_empty());
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut rng = rng(9);
    let mut gt = String::from("segment_id,chain,metric,value\n");
    for v in 0..30 {
        let id = format!("src{v:02}#000");
        let seg = random_segment(&mut rng, 64, 32, 30);
        let f = FeatureExtractor::new(32, 15).unwrap().extract(&id, &seg).unwrap();
        write_features(&f, &d.join(format!("{id}.csv"))).unwrap();
        for chain in ["16.8;4.5", "5.8;2.4", "8.1;0.6"] {
            gt.push_str(&format!("{id},{chain},VMAF,{:.2}\n", rng.gen_range(40.0..90.0)));
        }
    }
    let gt_path = d.join("gt.csv");
    std::fs::write(&gt_path, gt).unwrap();
    let model = d.join("m.json");
    let data = ["--features-dir", path_str(d), "--ground-truth", path_str(&gt_path)];

    let mut args = vec!["train", "--epochs", "3", "--hidden", "8", "-o", path_str(&model)];
    args.extend(data);
    let run = rrq(&args);
    assert!(run.status.success(), "{}", stderr(&run));

    let report = d.join("report.csv");
    let mut args = vec!["--json", "evaluate", "--model", path_str(&model), "--all", "-o", path_str(&report)];
    args.extend(data);
    let run = rrq(&args);
    assert!(run.status.success(), "{}", stderr(&run));
    let v: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(v["M"], 2);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r["n"].as_u64().unwrap()).sum::<u64>(), 30 * 3);
    assert!(std::fs::read_to_string(&report).unwrap().starts_with("rung,resolution,mbps,M,metric,n,r2,mae,jnd_violations"));
}
