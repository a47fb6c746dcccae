use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stlfd");

fn stlfd(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("STLFD_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = stlfd(args);
    assert!(
        out.status.success(),
        "stlfd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_scene(dir: &Path, extra: &[&str]) -> PathBuf {
    let seq = dir.join("seq");
    let mut args = vec![
        "synth",
        "--out",
        p(&seq),
        "--frames",
        "24",
        "--width",
        "96",
        "--height",
        "96",
        "--start",
        "20,20",
    ];
    args.extend_from_slice(extra);
    ok(&args);
    seq
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if path.is_dir() {
            out.extend(
                tree(&path)
                    .into_iter()
                    .map(|(n, b)| (format!("{name}/{n}"), b)),
            );
        } else if name != "timing.csv" {
            out.push((name, fs::read(&path).unwrap()));
        }
    }
    out.sort();
    out
}

fn summary_value(path: &Path, metric: &str) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{metric},")).map(str::to_string))
        .unwrap()
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    for args in [
        vec!["detect", "--input", out, "--out", out, "--abs-kernel", "14"],
        vec!["detect", "--out", out],
        vec!["eval", "--run", out],
        vec!["synth", "--out", out, "--drift", "1"],
        vec!["synth", "--out", out, "--preset", "cloudy"],
        vec!["frobnicate"],
    ] {
        assert_eq!(stlfd(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = stlfd(&[
        "detect",
        "--input",
        p(&empty),
        "--out",
        p(&dir.path().join("run")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no files matching"));

    let seq = small_scene(dir.path(), &[]);
    let run = dir.path().join("run");
    ok(&["detect", "--input", p(&seq), "--out", p(&run)]);
    let missing_gt = stlfd(&[
        "eval",
        "--run",
        p(&run),
        "--gt",
        p(&dir.path().join("nope.csv")),
    ]);
    assert_eq!(missing_gt.status.code(), Some(1));
}

#[test]
fn detect_writes_masks_detections_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let seq = small_scene(dir.path(), &[]);
    let run = dir.path().join("run");
    ok(&[
        "detect",
        "--input",
        p(&seq),
        "--out",
        p(&run),
        "--emit-intermediate",
    ]);
    for name in [
        "manifest.toml",
        "detections.csv",
        "timing.csv",
        "mask_000010.png",
        "stlfd_000023.pgm",
        "smap_000000.pgm",
        "tmap_000010.pgm",
        "stmap_000010.pgm",
    ] {
        assert!(run.join(name).is_file(), "missing {name}");
    }
    assert!(!run.join("mask_000009.png").exists());
    let manifest = fs::read_to_string(run.join("manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"detect\""));
    assert!(manifest.contains("gap = 5"));
}

#[test]
fn manifest_reproduces_a_detect_run() {
    let dir = tempfile::tempdir().unwrap();
    let seq = small_scene(dir.path(), &["--preset", "jitter", "--seed", "3"]);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    ok(&[
        "detect",
        "--input",
        p(&seq),
        "--out",
        p(&first),
        "--k-sigma",
        "6",
        "--raw-dump",
    ]);
    ok(&[
        "detect",
        "--config",
        p(&first.join("manifest.toml")),
        "--out",
        p(&second),
    ]);
    assert_eq!(tree(&first), tree(&second));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[detector.abs]\nkernel = 14\n").unwrap();
    let out = stlfd(&[
        "detect",
        "--input",
        p(&seq),
        "--config",
        p(&bad),
        "--out",
        p(&second),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&[
            "synth",
            "--preset",
            "static",
            "--seed",
            "7",
            "--frames",
            "12",
            "--out",
            p(out),
        ]);
    }
    assert_eq!(tree(&a), tree(&b));
    assert_eq!(fs::read_dir(&a).unwrap().count(), 12 + 2);

    let drift = dir.path().join("drift");
    ok(&[
        "synth",
        "--preset",
        "drift",
        "--frames",
        "12",
        "--out",
        p(&drift),
    ]);
    let manifest = fs::read_to_string(drift.join("manifest.toml")).unwrap();
    assert!(manifest.contains("drift = [0.6, 0.3]"), "{manifest}");
}

#[test]
fn abs_ablation_raises_false_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    ok(&[
        "synth",
        "--out",
        p(&seq),
        "--frames",
        "40",
        "--amplitude",
        "0.1",
        "--noise",
        "0.02",
    ]);
    let gt = seq.join("gt.csv");
    let mut false_alarm = Vec::new();
    for (name, extra) in [("with", None), ("without", Some("--no-abs"))] {
        let run = dir.path().join(name);
        let mut args = vec![
            "detect",
            "--input",
            p(&seq),
            "--out",
            p(&run),
            "--k-sigma",
            "4",
        ];
        args.extend(extra);
        ok(&args);
        ok(&["eval", "--run", p(&run), "--gt", p(&gt)]);
        let pf: f64 = summary_value(&run.join("eval/eval_summary.csv"), "operating_pf")
            .parse()
            .unwrap();
        false_alarm.push(pf);
    }
    assert!(
        false_alarm[1] > false_alarm[0],
        "false-alarm rate with ABS {} vs without {}",
        false_alarm[0],
        false_alarm[1]
    );
}

#[test]
fn eval_reports_roc_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let seq = small_scene(dir.path(), &[]);
    let run = dir.path().join("run");
    ok(&["detect", "--input", p(&seq), "--out", p(&run)]);
    let stdout = ok(&[
        "eval",
        "--run",
        p(&run),
        "--gt",
        p(&seq.join("gt.csv")),
        "--roc-steps",
        "2",
    ]);
    assert!(stdout.contains("auc"));

    let roc = fs::read_to_string(run.join("eval/roc.csv")).unwrap();
    let lines: Vec<&str> = roc.lines().collect();
    assert_eq!(lines[0], "threshold,pd,pf");
    assert_eq!(lines.len(), 3);
    let point = |l: &str| -> (f64, f64) {
        let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
        (f[1], f[2])
    };
    let (hi, lo) = (point(lines[1]), point(lines[2]));
    assert!(lo.0 >= hi.0 && lo.1 >= hi.1);

    let summary = run.join("eval/eval_summary.csv");
    for metric in ["auc", "mean_scrg", "mean_bsf"] {
        let v: f64 = summary_value(&summary, metric).parse().unwrap();
        assert!(v.is_finite(), "{metric} = {v}");
    }
}

#[test]
fn eval_without_targets_reports_na() {
    let dir = tempfile::tempdir().unwrap();
    let seq = small_scene(dir.path(), &["--amplitude", "0"]);
    let gt = seq.join("gt.csv");
    assert_eq!(fs::read_to_string(&gt).unwrap().trim(), "frame,cx,cy,w,h");
    let run = dir.path().join("run");
    ok(&["detect", "--input", p(&seq), "--out", p(&run)]);
    let out = dir.path().join("scores");
    ok(&["eval", "--run", p(&run), "--gt", p(&gt), "--out", p(&out)]);
    let summary = out.join("eval_summary.csv");
    assert_eq!(summary_value(&summary, "auc"), "NA");
    assert_eq!(summary_value(&summary, "operating_pd"), "NA");
    let roc = fs::read_to_string(out.join("roc.csv")).unwrap();
    assert!(roc
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("NA")));
}

#[test]
fn eval_rejects_mismatched_input() {
    let dir = tempfile::tempdir().unwrap();
    let seq = small_scene(dir.path(), &[]);
    let run = dir.path().join("run");
    ok(&["detect", "--input", p(&seq), "--out", p(&run)]);
    let other = dir.path().join("other");
    ok(&[
        "synth",
        "--out",
        p(&other),
        "--frames",
        "24",
        "--width",
        "80",
        "--height",
        "80",
        "--start",
        "20,20",
    ]);
    let out = stlfd(&[
        "eval",
        "--run",
        p(&run),
        "--gt",
        p(&seq.join("gt.csv")),
        "--input",
        p(&other),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));
}
