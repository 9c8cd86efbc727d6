use std::path::{Path, PathBuf};

use toonbench_core::bench::{
    render_report, run_benchmark, BenchOptions, ModelRun, RenderOptions, ReportFormat, Scope,
};
use toonbench_core::dataset::Category;
use toonbench_core::synthetic::{write_fixture, Degradation, FixtureSpec};
use toonbench_core::MetricId;

fn golden_spec() -> FixtureSpec {
    FixtureSpec {
        width: 48,
        height: 48,
        per_category: 1,
        categories: Category::ALL.to_vec(),
        seed: 2024,
        models: vec![
            ("crisp".to_string(), Degradation::BoundaryNoise { band: 1, seed: 1 }),
            ("hazy".to_string(), Degradation::Haze(90)),
        ],
    }
}

fn runs(dirs: &[(String, PathBuf)]) -> Vec<ModelRun> {
    dirs.iter().map(|(n, d)| ModelRun::new(n.clone(), d.clone())).collect()
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/two_models.md")
}

#[test]
fn golden_markdown_matches() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_fixture(dir.path(), &golden_spec()).unwrap();
    let out = run_benchmark(&fixture.manifest, &runs(&fixture.prediction_dirs), &BenchOptions::default()).unwrap();
    let md = render_report(&out.reports, ReportFormat::Markdown, &RenderOptions::default()).unwrap();
    if std::env::var_os("TOONBENCH_BLESS").is_some() {
        std::fs::create_dir_all(golden_path().parent().unwrap()).unwrap();
        std::fs::write(golden_path(), &md).unwrap();
    }
    let expected = std::fs::read_to_string(golden_path()).unwrap();
    assert_eq!(md, expected);
}

#[test]
fn overall_is_consistent_with_categories() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        per_category: 12,
        categories: vec![Category::Reference, Category::Action, Category::Items],
        ..golden_spec()
    };
    let fixture = write_fixture(dir.path(), &spec).unwrap();
    let out = run_benchmark(&fixture.manifest, &runs(&fixture.prediction_dirs), &BenchOptions::default()).unwrap();
    for (model, _) in &fixture.prediction_dirs {
        let mine: Vec<_> = out.reports.iter().filter(|r| &r.model_name == model).collect();
        let overall = mine.iter().find(|r| r.scope == Scope::Overall).unwrap();
        let cats: Vec<_> = mine.iter().filter(|r| r.scope != Scope::Overall).collect();
        assert_eq!(overall.image_count, cats.iter().map(|r| r.image_count).sum::<usize>());
        for m in MetricId::ALL {
            let means: Vec<f64> = cats.iter().filter_map(|r| r.mean(m)).collect();
            let o = overall.mean(m).unwrap();
            let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo - 1e-12 <= o && o <= hi + 1e-12, "{model} {m}: {lo} <= {o} <= {hi}");
        }
    }
}

#[test]
fn artifacts_are_reproducible_across_workers_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write_fixture(dir.path(), &golden_spec()).unwrap();
    let runs = runs(&fixture.prediction_dirs);
    let render_all = |jobs: usize| {
        let out = run_benchmark(&fixture.manifest, &runs, &BenchOptions { jobs, ..Default::default() }).unwrap();
        [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json]
            .map(|f| render_report(&out.reports, f, &RenderOptions::default()).unwrap())
    };
    let first = render_all(1);
    for jobs in [1, 2, 3, 8] {
        assert_eq!(render_all(jobs), first, "jobs = {jobs}");
    }
}
