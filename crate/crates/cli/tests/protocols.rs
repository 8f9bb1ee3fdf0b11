mod common;

use common::{csv_rows, run_ok};

fn suite(dir: &std::path::Path) {
    run_ok(dir, &["synth", "--pairs", "150", "--output", "data"]);
}

#[test]
fn leave_one_out_writes_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    suite(dir.path());
    let stdout = run_ok(dir.path(), &["evaluate", "--data", "data", "--output", "loo", "--jobs", "3"]);
    assert!(stdout.contains("| gen-a |") || stdout.contains("gen-a"), "{stdout}");
    let rows = csv_rows(&dir.path().join("loo/leave-one-out.csv"));
    assert_eq!(rows.len(), 3);
    for (row, target) in rows.iter().zip(["gen-a", "gen-b", "gen-c"]) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[2], target);
        assert_eq!(fields[4], "300");
    }
    assert!(dir.path().join("loo/leave-one-out.md").exists());
    assert!(dir.path().join("loo/leave-one-out.json").exists());
}

#[test]
fn transfer_writes_nine_rows_and_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    suite(dir.path());
    run_ok(
        dir.path(),
        &["evaluate", "--protocol", "transfer", "--data", "data", "--output", "tr", "--jobs", "3"],
    );
    assert_eq!(csv_rows(&dir.path().join("tr/transfer.csv")).len(), 9);
    let grid = csv_rows(&dir.path().join("tr/transfer_grid.csv"));
    assert_eq!(grid.len(), 3);
    assert!(grid.iter().all(|r| r.split(',').count() == 6));
}

#[test]
fn ablation_writes_five_points() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["synth", "--pairs", "60", "--output", "data"]);
    run_ok(
        dir.path(),
        &[
            "evaluate",
            "--protocol",
            "ablation",
            "--sizes",
            "[4, 8, 16, 32, 48]",
            "--repeats",
            "3",
            "--max-epochs",
            "20",
            "--patience",
            "3",
            "--data",
            "data",
            "--output",
            "abl",
            "--jobs",
            "3",
        ],
    );
    let rows = csv_rows(&dir.path().join("abl/ablation_curve.csv"));
    assert_eq!(rows.len(), 5);
    let ns: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(ns, ["4", "8", "16", "32", "48"]);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("3")));
}

#[test]
fn reports_are_independent_of_job_count() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["synth", "--pairs", "80", "--output", "data"]);
    let eval = |out: &str, jobs: &str| {
        run_ok(
            dir.path(),
            &["evaluate", "--protocol", "transfer", "--data", "data", "--output", out, "--jobs", jobs],
        );
        std::fs::read(dir.path().join(out).join("transfer.csv")).unwrap()
    };
    assert_eq!(eval("serial", "1"), eval("parallel", "4"));
}

#[test]
fn report_command_renders_saved_reports() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(dir.path(), &["synth", "--pairs", "60", "--output", "data"]);
    run_ok(
        dir.path(),
        &["evaluate", "--protocol", "transfer", "--data", "data", "--output", "tr"],
    );
    let csv = run_ok(dir.path(), &["report", "tr/transfer.json", "--format", "csv"]);
    assert_eq!(csv.as_bytes(), std::fs::read(dir.path().join("tr/transfer.csv")).unwrap());
    let grid = run_ok(dir.path(), &["report", "tr/transfer.json", "--format", "grid"]);
    assert!(grid.starts_with("source,"));
    let md = run_ok(dir.path(), &["report", "tr/transfer.json"]);
    assert!(md.contains('|'));
}
