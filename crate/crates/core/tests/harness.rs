use wssfem::harness::{
    emit_report, report_csv, run_convergence, run_convergence_partial, run_level, AnalyticCase, CaseKind, CaseSpec,
    ConvergenceReport, ReportFormat,
};
use wssfem::stokes::ElementPair;
use wssfem::wss::WssMethod;

fn two_level_study() -> ConvergenceReport {
    run_convergence(&CaseSpec::new(CaseKind::Stokes2d, ElementPair::P2P1).with_levels([0, 1])).unwrap()
}

/// CSV text with the trailing wall-time column removed from every row.
fn without_timing(csv: &str) -> String {
    csv.lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn csv_has_one_row_per_level_and_a_rate_row() {
    let report = two_level_study();
    let csv = report_csv(&report).unwrap();
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let header = reader.headers().unwrap().clone();
    assert_eq!(header.get(0), Some("level"));
    assert_eq!(header.iter().last(), Some("wall_time_s"));
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][0], "0");
    assert_eq!(&rows[1][0], "1");
    assert_eq!(&rows[2][0], "rate");
    let col = header.iter().position(|h| h == "err_v").unwrap();
    let rate: f64 = rows[2][col].parse().unwrap();
    assert!((rate - report.rate("v").unwrap()).abs() < 1e-9);
}

#[test]
fn json_round_trip_is_lossless() {
    let report = two_level_study();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_report(&report, ReportFormat::Json, dir.path()).unwrap();
    let parsed: ConvergenceReport = serde_json::from_str(&std::fs::read_to_string(&paths[0]).unwrap()).unwrap();
    assert_eq!(parsed, report);
}

#[test]
fn plotdata_writes_one_series_per_method() {
    let report = two_level_study();
    let dir = tempfile::tempdir().unwrap();
    let paths = emit_report(&report, ReportFormat::Plotdata, dir.path()).unwrap();
    assert_eq!(paths.len(), 4);
    for (path, m) in paths.iter().zip(WssMethod::ALL) {
        assert!(path.file_name().unwrap().to_str().unwrap().ends_with(&format!("wss_{m}.dat")));
        let text = std::fs::read_to_string(path).unwrap();
        let data: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(data.len(), 2);
        assert_eq!(data[1], vec![report.levels[1].h, report.levels[1].wss[&m].error]);
    }
}

#[test]
fn single_worker_reruns_are_identical() {
    let spec = CaseSpec::new(CaseKind::Stokes2d, ElementPair::P1P1).with_levels([0, 1]);
    let a = report_csv(&run_convergence(&spec).unwrap()).unwrap();
    let b = report_csv(&run_convergence(&spec).unwrap()).unwrap();
    assert_eq!(without_timing(&a), without_timing(&b));
}

#[test]
fn concurrent_levels_match_sequential_levels() {
    let spec = CaseSpec::new(CaseKind::Stokes2d, ElementPair::P1P1).with_levels([0, 1, 2]);
    let sequential = run_convergence(&spec).unwrap();
    let concurrent = run_convergence(&CaseSpec { workers: 3, ..spec }).unwrap();
    assert_eq!(without_timing(&report_csv(&sequential).unwrap()), without_timing(&report_csv(&concurrent).unwrap()));
}

#[test]
fn a_level_alone_matches_the_sequence() {
    let report = two_level_study();
    let spec = CaseSpec::new(CaseKind::Stokes2d, ElementPair::P2P1);
    let alone = run_level(&spec, 1).unwrap();
    let within = &report.levels[1];
    assert_eq!((alone.err_v, alone.err_p), (within.err_v, within.err_p));
    assert_eq!(alone.wss, within.wss);
}

#[test]
fn invalid_spec_reports_no_levels() {
    let spec = CaseSpec::new(CaseKind::Stokes2d, ElementPair::P2P1).with_levels([1]);
    let (report, err) = run_convergence_partial(&spec);
    assert!(!report.complete && report.levels.is_empty());
    assert_eq!(err.unwrap().kind(), "invalid_argument");
}

#[test]
fn analytic_registry_satisfies_the_strong_form() {
    let square = AnalyticCase::stokes2d();
    assert!(square.strong_residual(100, 7, false) <= 1e-10);
    let pipe = AnalyticCase::poiseuille3d();
    assert!(pipe.strong_residual(100, 7, false) <= 1e-10);
    // Fully developed pipe flow has no convective acceleration.
    assert!(pipe.strong_residual(100, 7, true) <= 1e-10);
}
