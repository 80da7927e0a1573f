//! End-to-end runs of the `superunit` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superunit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SUPERUNIT_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = run(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn gen_writes_a_chip_with_all_devices() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["gen", "--distance", "5", "--yield", "1", "--seed", "3"], dir.path());
    assert!(stdout.contains("devices=81 working=81"), "{stdout}");
    let json = fs::read_to_string(dir.path().join("d5_y1_s3.json")).unwrap();
    assert!(json.contains("superunit-chip"));
}

#[test]
fn sim_writes_one_row_per_rate() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &[
            "sim",
            "--distance",
            "3",
            "--p",
            "0.002",
            "--p",
            "0.004",
            "--p",
            "0.006",
            "--target-errors",
            "5",
            "--max-rounds",
            "2000",
        ],
        dir.path(),
    );
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let rows = data_rows(&results);
    assert_eq!(rows.len(), 3, "{results}");
    assert!(rows.iter().all(|r| r.starts_with("d3_y1_s1,3,")));
    assert_eq!(
        data_rows(&fs::read_to_string(dir.path().join("metrics.csv")).unwrap()).len(),
        1
    );
}

#[test]
fn unencodable_chip_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/unencodable.txt");
    let o = run(&["compile", "--chip-file", fixture.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error kind=unencodable"));
}

#[test]
fn invalid_arguments_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen", "--yield", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "sim",
        "--distance",
        "3",
        "--yield",
        "0.95",
        "--seed",
        "7",
        "--p",
        "0.005",
        "--target-errors",
        "20",
        "--max-rounds",
        "4000",
    ];
    ok(&args, a.path());
    ok(&args, b.path());
    let read = |d: &Path| fs::read_to_string(d.join("results.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn analyze_culls_an_ensemble() {
    let chips = tempfile::tempdir().unwrap();
    let runs = tempfile::tempdir().unwrap();
    let analysis = tempfile::tempdir().unwrap();
    ok(
        &[
            "gen",
            "--distance",
            "3",
            "--yield",
            "0.97",
            "--seed",
            "10",
            "--count",
            "6",
        ],
        chips.path(),
    );
    ok(
        &[
            "sim",
            "--chip-file",
            chips.path().to_str().unwrap(),
            "--p",
            "0.006",
            "--target-errors",
            "10",
            "--max-rounds",
            "4000",
        ],
        runs.path(),
    );
    let stdout = ok(
        &["analyze", "--in", runs.path().to_str().unwrap(), "--cull", "0.5"],
        analysis.path(),
    );
    assert!(stdout.contains("keep 0.5: 3 chips"), "{stdout}");
    let culling = fs::read_to_string(analysis.path().join("culling.csv")).unwrap();
    assert!(culling.lines().any(|l| l.starts_with("0.5,3,")), "{culling}");
    assert!(analysis.path().join("correlation.csv").exists());
}

#[test]
fn report_writes_gnuplot_files() {
    let runs = tempfile::tempdir().unwrap();
    let plot = tempfile::tempdir().unwrap();
    ok(
        &[
            "sim",
            "--distance",
            "3",
            "--p",
            "0.004",
            "--p",
            "0.008",
            "--target-errors",
            "5",
            "--max-rounds",
            "2000",
        ],
        runs.path(),
    );
    ok(
        &["report", "--in", runs.path().join("results.csv").to_str().unwrap()],
        plot.path(),
    );
    assert!(fs::read_to_string(plot.path().join("plot.gp"))
        .unwrap()
        .contains("plot.dat"));
    assert_eq!(
        fs::read_to_string(plot.path().join("plot.dat"))
            .unwrap()
            .lines()
            .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
            .count(),
        2
    );
}
