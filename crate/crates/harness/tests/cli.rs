use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn conformance(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data/conformance")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hevcface"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn truncated_stream_exits_3_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bytes = fs::read(conformance("face_128_qp22.hevc")).unwrap();
    let cut = dir.path().join("cut.hevc");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let out = run(&["extract", s(&cut), "-o", s(&dir.path().join("x.fimg"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CTU ("));
}

#[test]
fn inter_slice_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = fs::read(conformance("face_064_qp32.hevc")).unwrap();
    // first VCL NAL: slice_type ue(v) "011" (I) becomes "010" (P)
    let mut i = 0;
    loop {
        i += b[i..].windows(3).position(|w| w == [0, 0, 1]).unwrap() + 3;
        if (b[i] >> 1) & 0x3f < 32 {
            break;
        }
    }
    assert_eq!(b[i + 2] & 0xfc, 0b1010_1100);
    b[i + 2] &= !0x04;
    let p = dir.path().join("p.hevc");
    fs::write(&p, &b).unwrap();
    let out = run(&["extract", s(&p), "-o", s(&dir.path().join("p.fimg"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("inter_slice"));
}

#[test]
fn extract_many_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let a = conformance("cat_064_qp32.hevc");
    let b = conformance("face_128_qp42.hevc");
    ok(&[
        "extract",
        s(&a),
        s(&b),
        "-o",
        s(&out),
        "--ppm",
        "--compact",
        "--jobs",
        "2",
    ]);
    let info = ok(&["inspect", s(&out.join("face_128_qp42.fimg"))]);
    assert_eq!(info.trim(), "feature image 128x128, QP 42");
    let ppm = fs::read(out.join("cat_064_qp32.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n64 64\n255\n"));

    let stream = ok(&["inspect", s(&a)]);
    let bins = fs::read_to_string(conformance("cat_064_qp32.bins")).unwrap();
    assert!(
        stream.contains(&format!("{} bins", bins.trim())),
        "{stream}"
    );
    let csv = ok(&["inspect", s(&a), "--csv"]);
    assert!(csv.starts_with("x,y,size,ipm,bins\n"));
    let trace = dir.path().join("bins.csv");
    ok(&["inspect", s(&a), "--bins-trace", s(&trace)]);
    let lines = fs::read_to_string(&trace).unwrap().lines().count();
    assert_eq!(lines as u64, bins.trim().parse::<u64>().unwrap() + 1);
}

#[test]
fn train_predict_eval_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["synth", "-o", s(&corpus), "--count", "80", "--seed", "4"]);
    let manifest = corpus.join("manifest.jsonl");
    let mut reports = Vec::new();
    for run_id in ["a", "b"] {
        let model = dir.path().join(run_id).join("m.hfcn");
        ok(&[
            "train",
            "--manifest",
            s(&manifest),
            "--size",
            "64",
            "--qp",
            "32",
            "--seed",
            "7",
            "--epochs",
            "3",
            "--lr",
            "0.01",
            "-o",
            s(&model),
        ]);
        let report = dir.path().join(run_id).join("eval.json");
        ok(&[
            "eval",
            "--model",
            s(&model),
            "--manifest",
            s(&manifest),
            "-o",
            s(&report),
        ]);
        let pred = ok(&[
            "predict",
            "--model",
            s(&model),
            s(&corpus.join("synth_0000.fimg")),
            s(&corpus.join("synth_0079.fimg")),
        ]);
        assert_eq!(pred.lines().count(), 2);
        reports.push((
            fs::read(&model).unwrap(),
            fs::read(model.with_extension("json")).unwrap(),
            fs::read(model.with_extension("history.csv")).unwrap(),
            fs::read(&report).unwrap(),
            pred,
        ));
    }
    assert!(reports[0] == reports[1], "runs differ");

    let meta: serde_json::Value = serde_json::from_slice(&reports[0].1).unwrap();
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["epochs_run"], 3);
    let eval: serde_json::Value = serde_json::from_slice(&reports[0].3).unwrap();
    assert_eq!(eval["seed"], 7);
    assert_eq!(eval["split"], "test");
    // 15% of 80, stratified
    let n = ["tp", "fp", "tn", "fn"]
        .iter()
        .map(|k| eval[k].as_u64().unwrap())
        .sum::<u64>();
    assert_eq!(n, 12);
    let hist = String::from_utf8(reports[0].2.clone()).unwrap();
    assert!(hist.starts_with("epoch,train_loss,val_loss\n1,"));
}

#[test]
fn predict_rejects_wrong_size() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    ok(&["synth", "-o", s(&corpus), "--count", "20", "--size", "128"]);
    let small = dir.path().join("s");
    ok(&["synth", "-o", s(&small), "--count", "20"]);
    let model = dir.path().join("m.hfcn");
    ok(&[
        "train",
        "--manifest",
        s(&small.join("manifest.jsonl")),
        "--size",
        "64",
        "--qp",
        "32",
        "--epochs",
        "1",
        "-o",
        s(&model),
    ]);
    let out = run(&[
        "predict",
        "--model",
        s(&model),
        s(&corpus.join("synth_0000.fimg")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model expects 64x64"));
}

#[test]
fn sweep_skips_missing_configurations() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["synth", "-o", s(&corpus), "--count", "40", "--qp", "22"]);
    let out = dir.path().join("reports");
    let text = ok(&[
        "sweep",
        "--manifest-dir",
        s(&corpus),
        "--epochs",
        "2",
        "--lr",
        "0.01",
        "-o",
        s(&out),
    ]);
    assert_eq!(text.lines().filter(|l| l.ends_with("skipped")).count(), 5);
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 6);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report_64_qp22.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 0);
    assert_eq!(report["config"]["batch_size"], 64);
    assert_eq!(report["corpus_sha256"].as_str().unwrap().len(), 64);
    assert!(report["warnings"].as_array().unwrap()[0]
        .as_str()
        .unwrap()
        .contains("ratio"));
    assert!(out.join("model_64_qp22.hfcn").exists());
    assert!(out.join("history_64_qp22.csv").exists());
}

#[test]
fn bench_writes_stage_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("streams");
    fs::create_dir(&corpus).unwrap();
    for n in ["cat_064_qp32.hevc", "face_128_qp22.hevc"] {
        fs::copy(conformance(n), corpus.join(n)).unwrap();
    }
    let out = dir.path().join("timing.json");
    ok(&[
        "bench",
        "--corpus",
        s(&corpus),
        "--patches",
        "3",
        "-o",
        s(&out),
    ]);
    let t: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(t["streams"], 2);
    for k in ["parse_and_assemble", "cnn_64", "cnn_128"] {
        for f in ["count", "mean_ms", "p50_ms", "p95_ms"] {
            assert!(t[k][f].is_number(), "{k}.{f}");
        }
    }
    assert_eq!(t["cnn_64"]["count"], 3);
    assert!(t["cnn_64_faster"].is_boolean());
}
