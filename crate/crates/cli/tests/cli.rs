use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vidsafe::io::{write_dataset, VIDEOS_FILE};
use vidsafe::synthetic::{demo_world, random_record};
use vidsafe::Dataset;

fn vidsafe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vidsafe"))
        .args(args)
        .env_remove("VIDSAFE_API_KEYS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = vidsafe(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn dataset(dir: &Path, n: usize) {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
    let mut d = Dataset::new();
    for i in 0..n {
        d.upsert(random_record(format!("v{i:02}"), &mut rng));
    }
    write_dataset(dir, &d).unwrap();
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn featurize_writes_one_bundle_per_video() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("data");
    dataset(&data, 3);
    let out = t.path().join("features");
    ok(&["featurize", "--dataset", p(&data), "--out", p(&out)]);
    let bundles = lines(&out.join("features.jsonl"));
    assert_eq!(bundles.len(), 3);
    let first: serde_json::Value = serde_json::from_str(&bundles[0]).unwrap();
    assert_eq!(first["video_id"], "v00");
    assert!(out.join("featurizer.json").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn evaluate_prints_the_metrics_table() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("eval.tsv");
    #[rustfmt::skip]
    let stdout = ok(&[
        "--seed", "1", "evaluate", "--planted", "100", "--classes", "2", "--folds", "5",
        "--epochs", "1", "--learning-rate", "1e-3", "--baselines", "none", "--out", p(&out),
    ]);
    let table = lines(&out);
    assert_eq!(table[0], "model\taccuracy\tprecision\trecall\tf1\tauc");
    assert!(table[1].starts_with("fusion\t"));
    assert_eq!(table[1].split('\t').count(), 6);
    assert!(stdout.contains("fusion"));
    assert!(t.path().join("eval.tsv.json").exists());
}

#[test]
fn walk_logs_one_trace_per_walk() {
    let t = tempfile::tempdir().unwrap();
    let w = demo_world(200, 3);
    let fixtures = t.path().join("fixtures");
    w.provider.save_dir(&fixtures).unwrap();
    let labels: String = w.labels.0.iter().map(|(id, l)| format!("{id}\t{}\n", l.as_str())).collect();
    fs::write(t.path().join("labels.tsv"), labels).unwrap();
    let keywords = &w.elsagate_keywords[..2];
    fs::write(t.path().join("kw.txt"), keywords.join("\n")).unwrap();
    let out = t.path().join("traces.jsonl");
    #[rustfmt::skip]
    ok(&[
        "--seed", "9", "walk", "--keywords", p(&t.path().join("kw.txt")), "--walks", "10",
        "--labels", p(&t.path().join("labels.tsv")), "--fixtures", p(&fixtures), "--no-sanitize",
        "--out", p(&out),
    ]);
    assert_eq!(lines(&out).len(), 10 * keywords.len());

    let report = t.path().join("report");
    ok(&["walk-report", "--traces", p(&out), "--clusters", "2", "--out", p(&report)]);
    assert!(report.join("hops.tsv").exists());
}

#[test]
fn classify_is_deterministic_and_skips_corrupt_records() {
    let t = tempfile::tempdir().unwrap();
    let model = t.path().join("m.vsm");
    #[rustfmt::skip]
    ok(&[
        "--seed", "2", "train", "--planted", "60", "--classes", "2", "--epochs", "1",
        "--learning-rate", "1e-3", "--out", p(&model),
    ]);
    let data = t.path().join("data");
    dataset(&data, 10);
    let (a, b) = (t.path().join("a.tsv"), t.path().join("b.tsv"));
    ok(&["classify", "--model", p(&model), "--dataset", p(&data), "--out", p(&a)]);
    ok(&["classify", "--model", p(&model), "--dataset", p(&data), "--out", p(&b)]);
    assert_eq!(lines(&a).len(), 10);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    for line in lines(&a) {
        let f: Vec<&str> = line.split('\t').collect();
        assert!(f[1] == "appropriate" || f[1] == "inappropriate");
        assert!((0.0..=1.0).contains(&f[2].parse::<f64>().unwrap()));
    }

    let videos = data.join(VIDEOS_FILE);
    let mut text = lines(&videos);
    text[4] = r#"{"video_id": "v04", "title": 17}"#.to_string();
    fs::write(&videos, text.join("\n") + "\n").unwrap();
    let c = t.path().join("c.tsv");
    ok(&["classify", "--model", p(&model), "--dataset", p(&data), "--out", p(&c)]);
    assert_eq!(lines(&c).len(), 9);
    let skips = lines(&t.path().join("c.tsv.skipped.tsv"));
    assert_eq!(skips.len(), 2, "{skips:?}");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(vidsafe(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(vidsafe(&["train", "--out", "x.vsm"]).status.code(), Some(1));
}

#[test]
fn invalid_config_names_the_key() {
    let t = tempfile::tempdir().unwrap();
    let conf = t.path().join("run.conf");
    fs::write(&conf, "seed = abc\n").unwrap();
    let out = vidsafe(&["--config", p(&conf), "walk-report", "--traces", "x", "--out", "y"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`seed`"));

    fs::write(&conf, "api_base = a\napi_base = b\n").unwrap();
    let out = vidsafe(&["--config", p(&conf), "walk-report", "--traces", "x", "--out", "y"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("api_base"));
}

#[test]
fn missing_input_is_reported() {
    let out = vidsafe(&["featurize", "--dataset", "/nonexistent/data", "--out", "/tmp/never"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--dataset"));
}
