use std::path::Path;
use std::process::{Command, Output};

use renewal_hawkes::expectations::m_wfs;
use renewal_hawkes::volterra::{KernelTables, SolverPath};
use rhawkes_cli::config::{RunConfig, PAPER_CONFIG};
use rhawkes_cli::output::read_csv;

fn small_config() -> String {
    PAPER_CONFIG
        .replace("delta = 0.005", "delta = 0.01")
        .replace("horizon = 2.5", "horizon = 1.0")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn rhawkes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhawkes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn expect_writes_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let out = rhawkes(&[
        "expect",
        s(&cfg),
        "--class",
        "r1,r2,r3",
        "--out",
        s(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for class in ["r1", "r2", "r3"] {
        let (cols, rows) = read_csv(&dir.path().join(format!("expect_{class}_grid.csv"))).unwrap();
        assert_eq!(cols, ["t", "m", "lambda", "provenance"]);
        assert_eq!(rows.len(), 101);
        assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.0);
        assert!(rows.iter().all(|r| r[3] == "grid"));
    }
    let text = std::fs::read_to_string(dir.path().join("expect_r1_grid.csv")).unwrap();
    assert!(text.starts_with("# rhawkes "));
    assert!(text.contains("# model_sha256 "));
}

#[test]
fn closed_form_with_tabulated_kernel_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config().replace(
        r#"kernel = { kind = "exponential", beta = 2.0 }"#,
        r#"kernel = { kind = "tabulated", step = 0.5, values = [2.0, 0.7, 0.3, 0.1] }"#,
    );
    let cfg = write_config(dir.path(), &text);
    let out = rhawkes(&[
        "expect",
        s(&cfg),
        "--method",
        "closed-form",
        "--class",
        "classical",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn closed_form_classical_tracks_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    for method in ["grid", "closed-form"] {
        let out = rhawkes(&[
            "expect",
            s(&cfg),
            "--class",
            "classical",
            "--method",
            method,
            "--out",
            s(dir.path()),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let (_, g) = read_csv(&dir.path().join("expect_classical_grid.csv")).unwrap();
    let (_, c) = read_csv(&dir.path().join("expect_classical_closed-form.csv")).unwrap();
    let last = |rows: &Vec<Vec<String>>| rows[100][1].parse::<f64>().unwrap();
    assert!((last(&c) - 3.389056).abs() < 1e-6, "{}", last(&c));
    assert!((last(&g) - last(&c)).abs() / last(&c) < 10.0 * 0.01);
    assert!(c.iter().all(|r| r[3] == "closed-form"));
}

#[test]
fn wfs_output_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let text = small_config();
    let cfg = write_config(dir.path(), &text);
    let out = rhawkes(&["expect", s(&cfg), "--class", "wfs", "--out", s(dir.path())]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rc = RunConfig::parse(&text, "t").unwrap();
    let model = rc.model_spec().unwrap();
    let grid = rc.grid().unwrap();
    let lib = m_wfs(
        &model,
        &KernelTables::build(&model, &grid, SolverPath::Auto).unwrap(),
    )
    .unwrap();
    let (_, rows) = read_csv(&dir.path().join("expect_wfs_grid.csv")).unwrap();
    for (j, r) in rows.iter().enumerate() {
        assert_eq!(r[1], format!("{}", lib.m[j]));
        assert_eq!(r[2], format!("{}", lib.lambda[j]));
    }
}

#[test]
fn simulate_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = rhawkes(&[
            "simulate",
            s(&cfg),
            "--seed",
            "7",
            "--log-paths",
            "3",
            "--out",
            s(d),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let fa = std::fs::read(a.join("events_r1.csv")).unwrap();
    let fb = std::fs::read(b.join("events_r1.csv")).unwrap();
    assert_eq!(fa, fb);
    let (cols, rows) = read_csv(&a.join("events_r1.csv")).unwrap();
    assert_eq!(cols, ["path", "t", "kind"]);
    assert!(rows.iter().any(|r| r[0] == "2"));
}

#[test]
fn single_replication_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = rhawkes(&[
            "simulate",
            s(&cfg),
            "--reps",
            "1",
            "--seed",
            "42",
            "--horizon",
            "2",
            "--out",
            s(d),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for f in ["events_r1.csv", "renewals_r1.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap()
        );
    }
    let text = std::fs::read_to_string(a.join("events_r1.csv")).unwrap();
    assert!(text.contains("# seed 42") && text.contains("# horizon 2"));
}

#[test]
fn monte_carlo_interval_covers_the_grid_mean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PAPER_CONFIG);
    let out = rhawkes(&[
        "simulate",
        s(&cfg),
        "--reps",
        "20000",
        "--seed",
        "20240601",
        "--out",
        s(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let fine = dir.path().join("fine.toml");
    std::fs::write(
        &fine,
        PAPER_CONFIG
            .replace("delta = 0.005", "delta = 0.0005")
            .replace("horizon = 2.5", "horizon = 1.0"),
    )
    .unwrap();
    let out = rhawkes(&["expect", s(&fine), "--out", s(dir.path())]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (_, mc) = read_csv(&dir.path().join("mc_r1.csv")).unwrap();
    let (_, grid) = read_csv(&dir.path().join("expect_r1_grid.csv")).unwrap();
    let row = mc.iter().find(|r| r[0] == "1").unwrap();
    let (mean, hw): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
    let m1: f64 = grid.last().unwrap()[1].parse().unwrap();
    assert!((mean - m1).abs() <= hw, "mc {mean} +- {hw}, grid {m1}");
}

#[test]
fn appendix_b_counts_more_than_theorem3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &PAPER_CONFIG.replace("delta = 0.005", "delta = 0.5"),
    );
    let mut at2 = Vec::new();
    for conv in ["theorem3", "appendixB"] {
        let d = dir.path().join(conv);
        let out = rhawkes(&[
            "simulate",
            s(&cfg),
            "--class",
            "r3",
            "--reps",
            "4000",
            "--seed",
            "11",
            "--r3-convention",
            conv,
            "--out",
            s(&d),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let (cols, rows) = read_csv(&d.join("mc_r3.csv")).unwrap();
        assert_eq!(cols, ["t", "mean", "halfwidth"]);
        let row = rows.iter().find(|r| r[0] == "2").unwrap();
        at2.push(row[1].parse::<f64>().unwrap());
    }
    assert!(at2[1] > at2[0], "{at2:?}");
}

#[test]
fn replay_reads_a_simulated_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let out = rhawkes(&["simulate", s(&cfg), "--seed", "3", "--out", s(dir.path())]);
    assert!(out.status.success());
    let log = dir.path().join("events_r1.csv");
    let out = rhawkes(&[
        "replay",
        s(&cfg),
        "--log",
        s(&log),
        "--at",
        "0.25,0.5,1",
        "--out",
        s(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (cols, rows) = read_csv(&dir.path().join("replay.csv")).unwrap();
    assert_eq!(cols, ["t", "lambda"]);
    assert_eq!(rows.len(), 3);

    let out = rhawkes(&[
        "replay",
        s(&cfg),
        "--events",
        "0.2,0.4",
        "--renewals",
        "0.5",
        "--at",
        "0.6",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success());
    let (_, rows) = read_csv(&dir.path().join("replay.csv")).unwrap();
    let expect = 2.0 * 0.1 + 2.0 * 2.0 * ((-0.8f64).exp() + (-0.4f64).exp());
    assert!((rows[0][1].parse::<f64>().unwrap() - expect).abs() < 1e-12);
}

#[test]
fn optimize_reports_both_problems() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &PAPER_CONFIG.replace("delta = 0.005", "delta = 0.02"),
    );
    let out = rhawkes(&[
        "optimize",
        s(&cfg),
        "--problem",
        "1",
        "--out",
        s(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("T* = "));
    let out = rhawkes(&[
        "optimize",
        s(&cfg),
        "--problem",
        "2",
        "--mode",
        "bounds",
        "--out",
        s(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("lower-bound argmin") && stdout.contains("upper-bound argmin"));
    let (cols, rows) = read_csv(&dir.path().join("optimize_p2_r1.csv")).unwrap();
    assert_eq!(cols, ["T", "C", "lower", "upper"]);
    for r in &rows {
        let v: Vec<f64> = r[1..].iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[1] < v[2]);
        assert!(v[1] <= v[0] && v[0] <= v[2], "{r:?}");
    }
}

#[test]
fn missing_cost_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config().replace("c_ip = 5.0\n", ""));
    let out = rhawkes(&["optimize", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c_ip"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &small_config().replace("[grid]", "[grid]\nstep = 1"),
    );
    let out = rhawkes(&["expect", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));
}

#[test]
fn validate_with_tiny_samples_fails_and_writes_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config());
    let out = rhawkes(&[
        "validate",
        "--mc-reps",
        "10",
        "--ni-reps",
        "1000",
        "--halving",
        s(&cfg),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(
        stdout
            .lines()
            .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
            .count(),
        10
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verdict.json")).unwrap())
            .unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 10);
    assert_eq!(v["passed"], false);
    let order = v["halving"]["order"].as_f64().unwrap();
    assert!((0.8..=1.3).contains(&order), "{order}");
    assert!(stdout.contains("observed order"));
    let k10 = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["id"] == 5)
        .unwrap();
    assert!(!k10["variants"].as_array().unwrap().is_empty());
}
