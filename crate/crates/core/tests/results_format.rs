use std::path::Path;

use edmloc::experiment::{
    emit_results, lower_median, quantile, read_results, run_experiment, ExperimentConfig, Method,
    OutputFormat,
};

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_owned()
}

fn golden(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(p).unwrap().trim_end().to_owned()
}

fn small_table() -> edmloc::experiment::ResultTable {
    let cfg = ExperimentConfig {
        master_seed: 4,
        repetitions: 3,
        alpha_c: vec![0.5, 1.0],
        methods: vec![Method::Edm(1), Method::SrpPhat],
        exact_tdoa: true,
        ..ExperimentConfig::default()
    };
    run_experiment(&cfg).unwrap()
}

#[test]
fn csv_headers_match_golden_files() {
    let table = small_table();
    let dir = tempfile::tempdir().unwrap();
    emit_results(&table, dir.path(), OutputFormat::Csv).unwrap();
    assert_eq!(
        first_line(&dir.path().join("raw_results.csv")),
        golden("raw_results_header.csv")
    );
    assert_eq!(
        first_line(&dir.path().join("summary.csv")),
        golden("summary_header.csv")
    );
    assert_eq!(
        first_line(&dir.path().join("timings.csv")),
        golden("timings_header.csv")
    );
}

#[test]
fn summary_recomputable_from_raw_file() {
    let table = small_table();
    assert_eq!(table.records.len(), 12);
    let dir = tempfile::tempdir().unwrap();
    for format in [OutputFormat::Csv, OutputFormat::Json] {
        emit_results(&table, dir.path(), format).unwrap();
        let back = read_results(dir.path(), format).unwrap();
        assert_eq!(back.records, table.records);
        assert_eq!(back.summary, table.summary);
    }
    // independent recomputation of one cell
    let errs: Vec<f64> = table
        .records
        .iter()
        .filter(|r| r.alpha_c == 1.0 && r.method == Method::Edm(1))
        .map(|r| r.error_m.unwrap())
        .collect();
    let cell = table
        .summary
        .iter()
        .find(|s| s.alpha_c == 1.0 && s.method == Method::Edm(1))
        .unwrap();
    let mut sorted = errs.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(cell.median_m, Some(sorted[1]));
    assert_eq!(cell.median_m, lower_median(&errs));
    assert_eq!(cell.q75_m, quantile(&errs, 0.75));
    assert!(cell.median_m.unwrap() < 0.002);
}

#[test]
fn records_are_sorted_and_complete() {
    let table = small_table();
    let keys: Vec<(usize, Method)> = table
        .records
        .iter()
        .map(|r| (r.scenario_id, r.method))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(table
        .records
        .iter()
        .all(|r| r.failure.is_none() && r.error_m.unwrap() >= 0.0));
}
