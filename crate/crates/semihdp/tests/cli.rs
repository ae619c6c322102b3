//! End-to-end checks of the `semihdp` binary: subcommands, output layout,
//! and exit-code classes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_semihdp"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed with {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().expect("binary runs").status.code().unwrap_or(-1)
}

#[test]
fn generate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run_ok(&["generate", "--scenario", "III", "--n-per-group", "40", "--seed", "7", "--out",
        a.to_str().unwrap()]);
    run_ok(&["generate", "--scenario", "III", "--n-per-group", "40", "--seed", "7", "--out",
        b.to_str().unwrap()]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "byte-identical CSVs");
}

#[test]
fn run_then_summarize_layout_and_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let outdir = dir.path().join("out");
    run_ok(&["generate", "--scenario", "I", "--n-per-group", "40", "--seed", "3", "--out",
        csv.to_str().unwrap()]);
    run_ok(&[
        "run",
        "--input",
        csv.to_str().unwrap(),
        "--outdir",
        outdir.to_str().unwrap(),
        "--n-burnin",
        "100",
        "--n-iter",
        "300",
        "--thin",
        "3",
        "--pool-size",
        "30",
        "--seed",
        "5",
    ]);
    for file in [
        "records.jsonl",
        "similarity.csv",
        "partitions.csv",
        "bayes_factors.csv",
        "density_1.csv",
        "density_2.csv",
        "functionals.csv",
        "manifest.json",
    ] {
        assert!(outdir.join(file).exists(), "missing output {file}");
    }

    let sumdir = dir.path().join("resummary");
    run_ok(&[
        "summarize",
        "--records",
        outdir.join("records.jsonl").to_str().unwrap(),
        "--outdir",
        sumdir.to_str().unwrap(),
        "--pass-threshold",
        "4.0",
        "--grid",
        "-220:226:4000",
    ]);
    assert!(sumdir.join("similarity.csv").exists());
    assert!(sumdir.join("functionals.csv").exists());

    // Density grids mapped back to the original scale integrate to one on a
    // wide grid.
    let density = std::fs::read_to_string(sumdir.join("density_1.csv")).unwrap();
    let rows: Vec<(f64, f64)> = density
        .lines()
        .skip(1)
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            (cells[0].parse().unwrap(), cells[1].parse().unwrap())
        })
        .collect();
    let mut integral = 0.0;
    for pair in rows.windows(2) {
        integral += 0.5 * (pair[1].1 + pair[0].1) * (pair[1].0 - pair[0].0);
    }
    assert!(
        (integral - 1.0).abs() < 1e-3,
        "density integral on the original scale is {integral}"
    );
    let sim_a = std::fs::read_to_string(outdir.join("similarity.csv")).unwrap();
    let sim_b = std::fs::read_to_string(sumdir.join("similarity.csv")).unwrap();
    assert_eq!(sim_a, sim_b, "summarize reproduces the run's similarity matrix");
}

#[test]
fn multi_chain_run_writes_suffixed_records() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let outdir = dir.path().join("out");
    run_ok(&["generate", "--scenario", "I", "--n-per-group", "25", "--seed", "9", "--out",
        csv.to_str().unwrap()]);
    run_ok(&[
        "run",
        "--input",
        csv.to_str().unwrap(),
        "--outdir",
        outdir.to_str().unwrap(),
        "--n-burnin",
        "50",
        "--n-iter",
        "100",
        "--thin",
        "2",
        "--pool-size",
        "10",
        "--chains",
        "2",
    ]);
    assert!(outdir.join("records.jsonl").exists());
    assert!(outdir.join("records_chain2.jsonl").exists());
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    // Unknown scenario: configuration error.
    assert_eq!(
        exit_code(&["generate", "--scenario", "XL", "--out",
            dir.path().join("x.csv").to_str().unwrap()]),
        2
    );
    // Bad sampler mode: configuration error.
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "a,1.0\na,2.0\nb,1.5\nb,0.5\n").unwrap();
    assert_eq!(
        exit_code(&[
            "run",
            "--input",
            csv.to_str().unwrap(),
            "--outdir",
            dir.path().join("o").to_str().unwrap(),
            "--c-update-mode",
            "warp",
        ]),
        2
    );
    // Missing input: data error.
    assert_eq!(
        exit_code(&[
            "run",
            "--input",
            dir.path().join("absent.csv").to_str().unwrap(),
            "--outdir",
            dir.path().join("o2").to_str().unwrap(),
        ]),
        3
    );
    // Malformed row: data error naming the row.
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,1.0\na,oops\n").unwrap();
    let out = bin()
        .args([
            "run",
            "--input",
            bad.to_str().unwrap(),
            "--outdir",
            dir.path().join("o3").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
}

#[test]
fn oracle_check_fast_passes() {
    let out = bin().args(["oracle-check", "--fast", "--seed", "1"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "oracle-check failed:\n{stdout}");
    assert!(stdout.contains("PASS tie-probability"), "{stdout}");
    assert!(stdout.contains("PASS covariance"), "{stdout}");
    assert!(stdout.contains("PASS moment"), "{stdout}");
    assert!(stdout.contains("PASS peppf"), "{stdout}");
    assert!(stdout.contains("l2-closed-form"), "{stdout}");
    assert!(!stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn records_are_reparseable_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let outdir = dir.path().join("out");
    run_ok(&["generate", "--scenario", "I", "--n-per-group", "20", "--seed", "2", "--out",
        csv.to_str().unwrap()]);
    run_ok(&[
        "run",
        "--input",
        csv.to_str().unwrap(),
        "--outdir",
        outdir.to_str().unwrap(),
        "--n-burnin",
        "40",
        "--n-iter",
        "80",
        "--thin",
        "4",
        "--pool-size",
        "10",
    ]);
    let records = semihdp::records::read_records_jsonl(&outdir.join("records.jsonl")).unwrap();
    assert_eq!(records.len(), 20);
    for rec in &records {
        assert_eq!(rec.c.len(), 2);
        assert!(rec.kappa > 0.0 && rec.kappa < 1.0);
        let mix = rec.group_mixture(0).unwrap();
        assert!(mix.density(0.0).is_finite());
    }
    assert!(Path::new(&outdir).join("manifest.json").exists());
}
