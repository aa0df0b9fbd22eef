//! Report serialization: exact round trips, atomic writes, and the
//! console number formatting.

use std::path::PathBuf;

use rdgp::report::{
    format_sig, read_report_csv, read_report_json, report_to_csv, write_report_csv,
    write_report_json, ReportRow, SimulationReport, CSV_HEADER,
};
use rdgp::Error;

fn sample_report() -> SimulationReport {
    SimulationReport {
        n: 500,
        reps: 200,
        seed: 42,
        rows: vec![
            ReportRow {
                dgp: "lee".into(),
                method: "gpr".into(),
                reps: 199,
                ec: 0.8231155778894473,
                mean_il: 0.19001955,
                bias: 0.05,
                rmse: 0.07071067811865475,
                failures: 1,
                seed: 42,
            },
            ReportRow {
                dgp: "quad".into(),
                method: "llr".into(),
                reps: 200,
                ec: 0.928,
                mean_il: 0.2,
                bias: -0.001,
                rmse: 0.04,
                failures: 0,
                seed: 42,
            },
        ],
    }
}

#[test]
fn csv_header_matches_the_serialized_field_order() {
    let text = report_to_csv(&sample_report()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    assert_eq!(lines.count(), 2);
}

#[test]
fn csv_round_trips_at_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let report = sample_report();
    write_report_csv(&report, &path).unwrap();
    let rows = read_report_csv(&path).unwrap();
    assert_eq!(rows, report.rows);
}

#[test]
fn json_round_trips_with_settings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let report = sample_report();
    write_report_json(&report, &path).unwrap();
    let back = read_report_json(&path).unwrap();
    assert_eq!(back, report);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.ends_with('\n'));
}

#[test]
fn writes_replace_rather_than_append() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let mut report = sample_report();
    write_report_csv(&report, &path).unwrap();
    report.rows.truncate(1);
    write_report_csv(&report, &path).unwrap();
    let rows = read_report_csv(&path).unwrap();
    assert_eq!(rows.len(), 1);

    // No temp files left behind next to the report.
    let leftovers: Vec<PathBuf> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p != &path)
        .collect();
    assert!(leftovers.is_empty(), "stray files: {leftovers:?}");
}

#[test]
fn malformed_csv_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        format!("{CSV_HEADER}\nlee,gpr,199,0.82,0.19,0.05,0.07,1,42\nlee,gpr,not_a_number,0.9,0.2,0.0,0.1,0,42\n"),
    )
    .unwrap();
    match read_report_csv(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error with a line number, got {other:?}"),
    }
}

#[test]
fn missing_files_surface_as_io_errors() {
    assert!(matches!(
        read_report_json(std::path::Path::new("/nonexistent/report.json")),
        Err(Error::Io(_))
    ));
}

#[test]
fn significant_digit_formatting() {
    assert_eq!(format_sig(0.19001955, 3), "0.190");
    assert_eq!(format_sig(82.31155, 3), "82.3");
    assert_eq!(format_sig(-3.35, 3), "-3.35");
    assert_eq!(format_sig(123456.0, 3), "123456");
    assert_eq!(format_sig(0.000123456, 2), "0.00012");
    assert_eq!(format_sig(0.0, 4), "0");
    assert_eq!(format_sig(f64::NAN, 2), "NaN");
    assert_eq!(format_sig(f64::INFINITY, 2), "inf");
    assert_eq!(format_sig(-0.05, 1), "-0.05");
}

#[test]
#[should_panic(expected = "significant digit")]
fn zero_digits_is_a_caller_bug() {
    let _ = format_sig(1.0, 0);
}
