use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_specband"));
    c.env_remove("SPECBAND_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ar1_csv(dir: &Path, n: usize) -> PathBuf {
    let mut x = 0.0f64;
    let mut state = 12345u64;
    let mut out = String::from("value\n");
    for _ in 0..n {
        // Uniform(-1, 1) innovations from a small LCG keep the fixture self-contained.
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let e = (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        x = 0.8 * x + e;
        out.push_str(&format!("{x}\n"));
    }
    let p = dir.join("x.csv");
    std::fs::write(&p, out).unwrap();
    p
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn estimate_writes_one_row_per_fourier_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let input = ar1_csv(dir.path(), 200);
    let out = dir.path().join("est.csv");
    let o = run(&[
        "estimate",
        "--input",
        input.to_str().unwrap(),
        "--m-lag",
        "14",
        "--window",
        "parzen",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("# specband "));
    assert!(text.contains("# config_hash = "));
    let lines = data_lines(&text);
    assert_eq!(lines[0], "k,lambda,f_hat");
    assert_eq!(lines.len(), 1 + 100);
}

#[test]
fn band_output_has_provenance_and_brackets_the_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let input = ar1_csv(dir.path(), 256);
    let o = run(&[
        "band",
        "--input",
        input.to_str().unwrap(),
        "--m-lag",
        "14",
        "--bandwidth",
        "9.5",
        "--alpha",
        "0.1",
        "--bootstrap-reps",
        "1000",
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    for key in [
        "# seed = 7",
        "# bandwidth = 9.5",
        "# bootstrap_reps = 1000",
        "# cov_kernel = gaussian",
        "# quantile = ",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
    let lines = data_lines(&text);
    assert_eq!(lines[0], "lambda,f_hat,lower,upper");
    for l in &lines[1..] {
        let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(v[2] <= v[1] && v[1] <= v[3]);
    }
}

#[test]
fn band_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = ar1_csv(dir.path(), 128);
    let go = |threads: &str| {
        let o = run(&[
            "--threads",
            threads,
            "band",
            "--input",
            input.to_str().unwrap(),
            "--m-lag",
            "8",
            "--bandwidth",
            "2",
            "--bootstrap-reps",
            "500",
            "--seed",
            "3",
        ]);
        assert!(o.status.success());
        o.stdout
    };
    let one = go("1");
    assert_eq!(one, go("1"));
    assert_eq!(one, go("8"));
    let env = bin()
        .env("SPECBAND_THREADS", "2")
        .args([
            "band",
            "--input",
            input.to_str().unwrap(),
            "--m-lag",
            "8",
            "--bandwidth",
            "2",
            "--bootstrap-reps",
            "500",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert_eq!(one, env.stdout);
}

#[test]
fn gumbel_band_needs_no_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let input = ar1_csv(dir.path(), 256);
    let o = run(&[
        "band",
        "--input",
        input.to_str().unwrap(),
        "--m-lag",
        "10",
        "--method",
        "gumbel",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(data_lines(&text).len(), 11);
    assert!(text.contains("# gumbel_w2 = "));
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = ar1_csv(dir.path(), 64);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1\n2\nx\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["band", "--input", input.to_str().unwrap(), "--m-lag", "8"],
        vec![
            "estimate",
            "--input",
            input.to_str().unwrap(),
            "--m-lag",
            "64",
        ],
        vec!["estimate", "--input", bad.to_str().unwrap(), "--m-lag", "1"],
        vec!["estimate", "--input", "/nonexistent/x.csv", "--m-lag", "2"],
        vec![
            "estimate",
            "--input",
            input.to_str().unwrap(),
            "--m-lag",
            "3",
            "--window",
            "hann",
        ],
        vec![
            "band",
            "--input",
            input.to_str().unwrap(),
            "--m-lag",
            "4",
            "--bandwidth",
            "1",
            "--alpha",
            "1.5",
        ],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(
            o.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
    let o = run(&["estimate", "--input", bad.to_str().unwrap(), "--m-lag", "1"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn failed_run_leaves_existing_output_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("keep.csv");
    std::fs::write(&out, "old").unwrap();
    let o = run(&[
        "estimate",
        "--input",
        "/nonexistent/x.csv",
        "--m-lag",
        "2",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(std::fs::read_to_string(out).unwrap(), "old");
}

#[test]
fn simulate_reports_table_rows_and_audit_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    std::fs::write(
        &cfg,
        "# small study\nmodel = I\nT = 128\nm_lag = 6\nbandwidth = 1.0, 2.0\nalpha = 0.1, 0.05\nreplications = 10\nbootstrap_reps = 200\nseed = 4\n",
    )
    .unwrap();
    let out = dir.path().join("report.csv");
    let log = dir.path().join("log.csv");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--log",
        log.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("# cell1.seed = 4"));
    let lines = data_lines(&text);
    assert_eq!(lines[0], "model,method,T,M,b,level,R,B,cov,ml");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("I,bootstrap,128,6,1,90,10,200,"));
    let log_text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(
        data_lines(&log_text)
            .iter()
            .filter(|l| !l.starts_with("replication"))
            .count(),
        2 * 10 * 2
    );
}

#[test]
fn simulate_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(
        &cfg,
        "model = I\nT = 128\nm_lag = 6\nbandwidth = 1\nbogus = 3\n",
    )
    .unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key 'bogus'"));
}

#[test]
fn oracle_check_prints_a_line_per_check() {
    let o = run(&["oracle-check", "--quick"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines
        .iter()
        .all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
    let all_pass = lines.iter().all(|l| l.starts_with("PASS "));
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 2 }));
}
