use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vote_osr::features::read_feature_file;

const SMALL: &str = "\
seed = 5
grid.rows = 15
grid.cols = 50
grid.cell_lat = 1.0
grid.cell_long = 4.0
synth.count_per_class = 40
extractor.kind = \"flatten\"
forest.trees = 40
protocol.repeats = 2
";

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vote-osr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cli(dir, args);
    let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(out.status.success(), "{args:?} failed:\n{stderr}");
    stderr
}

fn fail(dir: &Path, args: &[&str]) -> String {
    let out = cli(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Appends the shared small config.
fn with<'a>(args: &[&'a str]) -> Vec<&'a str> {
    [args, &["--config", "small.toml"][..]].concat()
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "stages.jsonl")
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect()
}

fn stage_log(dir: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(dir.join("stages.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn run_writes_report_and_rerun_skips_every_stage() {
    let dir = workdir();
    let d = dir.path();
    ok(d, &["run", "--config", "small.toml", "--out", "out"]);
    let out = d.join("out");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let summary = report["summary"].as_array().unwrap();
    let evt = summary.iter().find(|m| m["method"] == "vote-evt").unwrap();
    let mean = evt["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mean));
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    assert_eq!(report["runs"][0]["known_classes"].as_array().unwrap().len(), 4);

    let first = snapshot(&out);
    let ran = stage_log(&out);
    assert!(ran.iter().all(|r| r["status"] == "ran"), "{ran:?}");
    let stages = ran.len();
    assert_eq!(stages, 6);

    let stderr = ok(d, &["run", "--config", "small.toml", "--out", "out"]);
    assert!(!stderr.contains("running"), "{stderr}");
    let log = stage_log(&out);
    assert_eq!(log.len(), 2 * stages);
    assert!(log[stages..].iter().all(|r| r["status"] == "skipped"));
    assert_eq!(snapshot(&out), first);

    // Every artifact carries the hash of the config that produced it.
    let hash = report["config_hash"].as_str().unwrap();
    for (path, bytes) in &first {
        if path.extension().is_some_and(|e| e == "json") && path.to_string_lossy().ends_with(".meta.json") {
            let meta: serde_json::Value = serde_json::from_slice(bytes).unwrap();
            assert_eq!(meta["config_hash"], hash, "{}", path.display());
        }
    }

    // Changing a forest key re-runs training and everything after it only.
    ok(d, &["run", "--config", "small.toml", "--out", "out", "--set", "forest.trees=30"]);
    let log = stage_log(&out);
    let third: BTreeMap<_, _> =
        log[2 * stages..].iter().map(|r| (r["stage"].as_str().unwrap().to_string(), r["status"].clone())).collect();
    assert_eq!(third["generate"], "skipped");
    assert_eq!(third["extract-features"], "skipped");
    assert_eq!(third["train-forest"], "ran");
    assert_eq!(third["evaluate"], "ran");
}

#[test]
fn out_of_range_delta_fails_before_writing_anything() {
    let dir = workdir();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), format!("{SMALL}evt.delta = 1.5\n")).unwrap();
    let stderr = fail(d, &["run", "--config", "bad.toml", "--out", "out"]);
    assert!(stderr.contains("delta"), "{stderr}");
    assert!(!d.join("out").exists());

    let stderr = fail(d, &["generate", "--config", "small.toml", "--set", "evt.lambda=0", "--out", "g.osrg"]);
    assert!(stderr.contains("lambda"), "{stderr}");
    assert!(!d.join("g.osrg").exists());
}

#[test]
fn bad_config_keys_and_worker_counts_are_rejected() {
    let dir = workdir();
    let d = dir.path();
    let stderr = fail(d, &["run", "--config", "small.toml", "--set", "forest.tres=3"]);
    assert!(stderr.contains("tres"), "{stderr}");
    let out = Command::new(env!("CARGO_BIN_EXE_vote-osr"))
        .current_dir(d)
        .env("OSR_WORKERS", "0")
        .args(["generate", "--config", "small.toml", "--out", "g.osrg"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("OSR_WORKERS"));
}

#[test]
fn missing_inputs_name_the_producing_stage() {
    let dir = workdir();
    let d = dir.path();
    let c = ["--config", "small.toml"];
    let stderr = fail(d, &[&["predict", "--forest", "f.osrt", "--evt", "e.osre", "--features", "x.osrf", "--out", "p.csv"][..], &c].concat());
    assert!(stderr.contains("train-forest"), "{stderr}");
    let stderr = fail(d, &[&["train-forest", "--features", "x.osrf", "--out", "f.osrt"][..], &c].concat());
    assert!(stderr.contains("extract-features"), "{stderr}");
    let stderr = fail(d, &[&["extract-features", "--scenarios", "s.osrg", "--out", "x.osrf"][..], &c].concat());
    assert!(stderr.contains("`generate`"), "{stderr}");
    assert!(!d.join("p.csv").exists() && !d.join("f.osrt").exists() && !d.join("x.osrf").exists());
}

#[test]
fn stages_chain_through_subcommands() {
    let dir = workdir();
    let d = dir.path();
    ok(d, &with(&["generate", "--classes", "ego-following,leader-cutin-left,leader-cutout-left,ego-left-lane-change", "--outliers", "20", "--out", "s.osrg"]));
    ok(d, &with(&["extract-features", "--scenarios", "s.osrg", "--split", "--out", "f"]));
    let test = read_feature_file(d.join("f.test.osrf")).unwrap();
    assert_eq!(test.labels.iter().filter(|l| l.is_none()).count(), 20);
    assert!(test.labels.iter().flatten().all(|&l| l < 4));

    let stderr = ok(d, &with(&["train-forest", "--features", "f.train.osrf", "--trees", "25", "--out", "m.osrt"]));
    assert!(stderr.contains("25 trees, 4 classes"), "{stderr}");
    ok(d, &with(&["calibrate", "--model", "m.osrt", "--features", "f.calib.osrf", "--lambda", "0.8", "--delta", "0.4", "--out", "e.osre"]));
    let evt = vote_osr::evt::read_evt_file(d.join("e.osre")).unwrap();
    assert_eq!((evt.lambda, evt.delta, evt.trees, evt.num_classes()), (0.8, 0.4, 25, 4));

    ok(d, &with(&["predict", "--forest", "m.osrt", "--evt", "e.osre", "--features", "f.test.osrf", "--out", "p.csv"]));
    let csv = std::fs::read_to_string(d.join("p.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "index,verdict,class,cdf_0,cdf_1,cdf_2,cdf_3,votes_0,votes_1,votes_2,votes_3"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), test.len());
    for r in &rows {
        let votes: u32 = r[7..].iter().map(|v| v.parse::<u32>().unwrap()).sum();
        assert_eq!(votes, 25);
        assert!(r[1] == "known" || r[1] == "unknown", "{r:?}");
    }

    // δ = 0 accepts every sample.
    ok(d, &with(&["predict", "--forest", "m.osrt", "--evt", "e.osre", "--features", "f.test.osrf", "--delta", "0", "--out", "p0.csv"]));
    let all_known = std::fs::read_to_string(d.join("p0.csv")).unwrap();
    assert!(all_known.lines().skip(1).all(|l| l.split(',').nth(1) == Some("known")));
    let stderr = fail(d, &with(&["predict", "--forest", "m.osrt", "--evt", "e.osre", "--features", "f.test.osrf", "--delta", "2", "--out", "p2.csv"]));
    assert!(stderr.contains("delta"), "{stderr}");
    assert!(!d.join("p2.csv").exists());
}

#[test]
fn evaluate_consumes_softmax_csv_and_ablate_writes_table() {
    let dir = workdir();
    let d = dir.path();
    ok(d, &with(&["generate", "--classes", "ego-following,leader-cutin-left,leader-cutout-left", "--outliers", "60", "--out", "s.osrg"]));
    ok(d, &with(&["extract-features", "--scenarios", "s.osrg", "--out", "all.osrf"]));
    let set = read_feature_file(d.join("all.osrf")).unwrap();

    // Perfect probabilities on knowns and flat rows on outliers.
    let mut csv = String::from("p0,p1,p2\n");
    for l in &set.labels {
        let row: Vec<String> = (0..3)
            .map(|k| match l {
                Some(l) if *l as usize == k => "1".into(),
                Some(_) => "0".into(),
                None => format!("{}", 1.0 / 3.0),
            })
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(d.join("softmax.csv"), csv).unwrap();
    ok(d, &with(&["evaluate", "--protocol", "outlier-addition", "--features", "all.osrf", "--softmax", "softmax.csv", "--set", "protocol.outlier_ratio=0.5", "--out", "r.json"]));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert!(report["softmax_skipped"].is_null());
    let softmax = report["summary"].as_array().unwrap().iter().find(|m| m["method"] == "softmax-naive").unwrap();
    assert_eq!(softmax["mean"].as_f64().unwrap(), 1.0);

    let stderr = fail(d, &with(&["evaluate", "--features", "all.osrf", "--softmax", "nope.csv", "--out", "r2.json"]));
    assert!(stderr.contains("nope.csv"), "{stderr}");

    ok(d, &with(&["ablate", "--kind", "delta", "--grid", "0.3,0.7", "--features", "all.osrf", "--set", "protocol.num_known=2", "--out", "t.csv"]));
    let table = std::fs::read_to_string(d.join("t.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "setting,run,macro_f1,mean,std");
    assert_eq!(lines.count(), 4);
}
