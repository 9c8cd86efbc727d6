use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use toonbench_core::dataset::{Category, DatasetManifest, Split};
use toonbench_core::synthetic::{write_fixture, Degradation, Fixture, FixtureSpec};

fn fixture() -> (TempDir, Fixture) {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        width: 32,
        height: 32,
        per_category: 10,
        categories: vec![Category::Reference, Category::Items],
        seed: 3,
        models: vec![
            ("exact".to_string(), Degradation::Exact),
            ("eroded".to_string(), Degradation::Erode(2)),
        ],
    };
    let fixture = write_fixture(dir.path(), &spec).unwrap();
    (dir, fixture)
}

fn toonbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toonbench")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn pred_args(f: &Fixture) -> Vec<String> {
    f.prediction_dirs
        .iter()
        .flat_map(|(n, d)| ["--pred".to_string(), format!("{n}={}", d.display())])
        .collect()
}

fn with<'a>(head: &[&'a str], tail: &'a [String]) -> Vec<&'a str> {
    head.iter().copied().chain(tail.iter().map(String::as_str)).collect()
}

fn manifest_arg(f: &Fixture) -> String {
    f.manifest_path.display().to_string()
}

#[test]
fn eval_writes_every_format() {
    let (dir, f) = fixture();
    let m = manifest_arg(&f);
    let preds = pred_args(&f);
    let md = toonbench(&with(&["eval", "--manifest", &m], &preds));
    assert_eq!(md.status.code(), Some(0), "{}", stderr(&md));
    let text = stdout(&md);
    assert!(text.starts_with("| Model | Scope | Images |"));
    assert_eq!(text.lines().filter(|l| l.starts_with("| exact") || l.starts_with("| eroded")).count(), 6);

    let csv = dir.path().join("out.csv");
    let out = toonbench(&with(
        &["eval", "--manifest", &m, "--format", "csv", "--out", csv.to_str().unwrap(), "--jobs", "2"],
        &preds,
    ));
    assert_eq!(out.status.code(), Some(0));
    let rows = std::fs::read_to_string(&csv).unwrap();
    let tests = f.manifest.records_in(Split::Test).count();
    assert_eq!(rows.lines().count(), 1 + 2 * tests);

    let json = toonbench(&with(&["eval", "--manifest", &m, "--format", "json", "--pa-delta", "0"], &preds));
    let reports: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 6);
}

#[test]
fn missing_predictions_fail_unless_allowed() {
    let (_dir, f) = fixture();
    let victim = f.manifest.records_in(Split::Test).next().unwrap().id.clone();
    std::fs::remove_file(f.prediction_dirs[1].1.join(format!("{victim}.png"))).unwrap();
    let m = manifest_arg(&f);
    let preds = pred_args(&f);
    let strict = toonbench(&with(&["eval", "--manifest", &m], &preds));
    assert_eq!(strict.status.code(), Some(1));
    assert!(stderr(&strict).contains(&victim));
    let lenient = toonbench(&with(&["eval", "--manifest", &m, "--allow-missing"], &preds));
    assert_eq!(lenient.status.code(), Some(0));
    assert!(stderr(&lenient).contains("warning"));
}

#[test]
fn usage_errors_exit_with_two() {
    let (_dir, f) = fixture();
    let m = manifest_arg(&f);
    assert_eq!(toonbench(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(toonbench(&["eval", "--manifest", &m, "--pred", "nodir"]).status.code(), Some(2));
    assert_eq!(toonbench(&["eval", "--manifest", &m]).status.code(), Some(2));
    let preds = pred_args(&f);
    assert_eq!(toonbench(&with(&["select", "--manifest", &m, "--criterion", "XYZ"], &preds)).status.code(), Some(2));
    assert_eq!(toonbench(&with(&["eval", "--manifest", &m, "--format", "pdf"], &preds)).status.code(), Some(2));
    assert_eq!(toonbench(&with(&["eval", "--manifest", &m, "--biou-ratio", "0"], &preds)).status.code(), Some(2));
    assert_eq!(toonbench(&["eval", "--manifest", "/no/such.json", "--pred", "a=b"]).status.code(), Some(1));
}

#[test]
fn select_honours_metric_direction() {
    let (_dir, f) = fixture();
    let m = manifest_arg(&f);
    let preds = pred_args(&f);
    for criterion in ["PA", "MAE", "BIoU"] {
        let out = toonbench(&with(&["select", "--manifest", &m, "--criterion", criterion], &preds));
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert_eq!(stdout(&out), "exact\n", "{criterion}");
    }
}

#[test]
fn split_is_reproducible() {
    let (dir, f) = fixture();
    let m = manifest_arg(&f);
    assert_eq!(toonbench(&["split", "--manifest", &m, "--seed", "42"]).status.code(), Some(1));
    let a = toonbench(&["split", "--manifest", &m, "--seed", "42", "--reassign"]);
    let b = toonbench(&["split", "--manifest", &m, "--seed", "42", "--reassign"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    let assigned = DatasetManifest::from_json(&stdout(&a), dir.path()).unwrap();
    for (_, (train, val, test)) in assigned.split_counts() {
        assert_eq!((train, val, test), (8, 1, 1));
    }
    let out = dir.path().join("split.json");
    toonbench(&["split", "--manifest", &m, "--seed", "42", "--reassign", "--out", out.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(out).unwrap(), stdout(&a));
}

#[test]
fn validate_reports_issues_with_exit_one() {
    let (_dir, f) = fixture();
    let m = manifest_arg(&f);
    let clean = toonbench(&["validate", "--manifest", &m]);
    assert_eq!(clean.status.code(), Some(0));
    assert_eq!(stdout(&clean), "");

    let record = &f.manifest.records[0];
    std::fs::remove_file(f.manifest.resolve(&record.mask_path)).unwrap();
    let broken = toonbench(&["validate", "--manifest", &m, "--format", "json"]);
    assert_eq!(broken.status.code(), Some(1));
    let issues: serde_json::Value = serde_json::from_str(&stdout(&broken)).unwrap();
    assert_eq!(issues.as_array().unwrap().len(), 1);
    assert_eq!(issues[0]["kind"], "missingFile");
    assert_eq!(issues[0]["id"], record.id.as_str());
}

#[test]
fn curate_caps_easy_examples() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scores.csv");
    let mut text = String::from("id,image,mask,category,score\n");
    for i in 0..10 {
        let score = if i < 6 { 0.999 } else { 0.9 + f64::from(i) / 1000.0 };
        text.push_str(&format!("r{i},i/{i}.png,m/{i}.png,items,{score}\n"));
    }
    std::fs::write(&csv, text).unwrap();
    let out = toonbench(&["curate", "--scores", csv.to_str().unwrap(), "--target", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let manifest = DatasetManifest::from_json(&stdout(&out), Path::new(".")).unwrap();
    let ids: Vec<&str> = manifest.records.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["r6", "r7", "r8", "r9", "r0"]);
    let too_many = toonbench(&["curate", "--scores", csv.to_str().unwrap(), "--target", "11"]);
    assert_eq!(too_many.status.code(), Some(1));
}

#[test]
fn concord_scores_rankings() {
    let (dir, f) = fixture();
    let m = manifest_arg(&f);
    let preds = pred_args(&f);
    let rankings = dir.path().join("rankings.jsonl");
    let lines: String = f
        .manifest
        .records_in(Split::Test)
        .map(|r| {
            format!(
                "{{\"imageId\":\"{}\",\"annotatorId\":\"x\",\"ordering\":[\"exact\",\"eroded\"],\"timestamp\":\"2024-01-01T00:00:00Z\"}}\n",
                r.id
            )
        })
        .collect();
    std::fs::write(&rankings, lines).unwrap();
    let r = rankings.to_str().unwrap();
    let out = toonbench(&with(&["concord", "--rankings", r, "--manifest", &m, "--format", "json"], &preds));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["comparablePairs"], f.manifest.records_in(Split::Test).count());
    let md = toonbench(&with(&["concord", "--rankings", r, "--manifest", &m], &preds));
    assert!(stdout(&md).starts_with("| Rank | Metric |"));

    std::fs::write(&rankings, "{\"imageId\":\"a\",\"annotatorId\":\"x\",\"ordering\":[\"exact\",\"ghost\"],\"timestamp\":\"2024-01-01T00:00:00Z\"}\n").unwrap();
    let unknown = toonbench(&with(&["concord", "--rankings", r, "--manifest", &m], &preds));
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn serve_needs_two_models() {
    let (dir, f) = fixture();
    let m = manifest_arg(&f);
    let pred = format!("exact={}", f.prediction_dirs[0].1.display());
    let r = dir.path().join("r.jsonl");
    let out = toonbench(&["serve", "--manifest", &m, "--pred", &pred, "--rankings", r.to_str().unwrap(), "--port", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("two models"));
}
