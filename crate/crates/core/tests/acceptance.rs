//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any fail.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specband::band::BandMethod;
use specband::checks::{self, Check, Scale};
use specband::io::{replication_log_csv, report_csv, Provenance};
use specband::longrun::CovKernel;
use specband::pipeline::{bootstrap_statistics, BandSettings};
use specband::sim::{
    coverage_experiment, simulate, ExperimentConfig, ExperimentResult, Model, ModelSpec,
};
use specband::window::Window;

const SEED: u64 = 1;

struct Outcome {
    id: usize,
    passed: bool,
    detail: String,
    elapsed: Duration,
    limit: Duration,
}

fn timed<F: FnOnce() -> (bool, String)>(id: usize, limit_secs: u64, f: F) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f();
    Outcome {
        id,
        passed,
        detail,
        elapsed: start.elapsed(),
        limit: Duration::from_secs(limit_secs),
    }
}

fn from_check(c: Result<Check, specband::Error>) -> (bool, String) {
    match c {
        Ok(c) => (c.passed, c.detail),
        Err(e) => (false, format!("error: {e}")),
    }
}

fn bootstrap_cell(b: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Model::I, 256, 10, b);
    cfg.replications = 200;
    cfg.bootstrap_reps = 1000;
    cfg.seed = SEED;
    cfg
}

fn gumbel_cell(model: Model, m: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(model, 256, m, 1.0);
    cfg.method = BandMethod::Gumbel;
    cfg.replications = 200;
    cfg.seed = SEED;
    cfg
}

/// Reference cells: (coverage 90, coverage 95, ML 90, ML 95).
struct Cell {
    label: String,
    cov: [f64; 2],
    ml: [f64; 2],
}

fn compare(
    res: &ExperimentResult,
    cell: &Cell,
    cov_levels: &[usize],
    ml_rel: f64,
) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, row) in res.rows.iter().enumerate() {
        let cov_ok = !cov_levels.contains(&a) || (row.coverage - cell.cov[a]).abs() <= 5.0;
        let ml_ok = (row.mean_length - cell.ml[a]).abs() <= ml_rel * cell.ml[a];
        ok &= cov_ok && ml_ok;
        parts.push(format!(
            "{}@{:.0}%: cov {:.1} (ref {:.1}{}), ML {:.3} (ref {:.2}{})",
            cell.label,
            100.0 * (1.0 - row.alpha),
            row.coverage,
            cell.cov[a],
            if cov_ok { "" } else { " X" },
            row.mean_length,
            cell.ml[a],
            if ml_ok { "" } else { " X" },
        ));
    }
    (ok, parts.join("; "))
}

fn criterion_2() -> ((bool, String), Vec<ExperimentResult>) {
    let cells = [
        (1.0, [92.6, 94.0], [0.56, 0.63]),
        (1.5, [90.6, 92.4], [0.47, 0.53]),
        (2.0, [89.2, 91.4], [0.43, 0.49]),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    let mut results = Vec::new();
    for (b, cov, ml) in cells {
        match coverage_experiment(&bootstrap_cell(b)) {
            Ok(res) => {
                let cell = Cell {
                    label: format!("b={b}"),
                    cov,
                    ml,
                };
                let (p, d) = compare(&res, &cell, &[0, 1], 0.20);
                ok &= p;
                detail.push(d);
                results.push(res);
            }
            Err(e) => return ((false, format!("error: {e}")), results),
        }
    }
    ((ok, detail.join(" | ")), results)
}

fn criterion_3() -> ((bool, String), Vec<ExperimentResult>) {
    let cells = [
        (Model::Iid, 10, [84.0, 89.4], [0.12, 0.13]),
        (Model::Iid, 14, [79.0, 85.0], [0.15, 0.16]),
        (Model::I, 10, [76.2, 84.0], [0.25, 0.28]),
        (Model::I, 14, [74.8, 80.8], [0.32, 0.35]),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    let mut results = Vec::new();
    for (model, m, cov, ml) in cells {
        match coverage_experiment(&gumbel_cell(model, m)) {
            Ok(res) => {
                let cell = Cell {
                    label: format!("{model} M={m}"),
                    cov,
                    ml,
                };
                // Coverage is pinned at the 90% level, ML at both levels.
                let (p, d) = compare(&res, &cell, &[0], 0.10);
                ok &= p;
                detail.push(d);
                results.push(res);
            }
            Err(e) => return ((false, format!("error: {e}")), results),
        }
    }
    ((ok, detail.join(" | ")), results)
}

fn criterion_4(
    boot_results: &[ExperimentResult],
    gumbel_results: &[ExperimentResult],
) -> (bool, String) {
    let gumbel_i10 = gumbel_results
        .iter()
        .find(|r| r.config.model == Model::I && r.config.m_lag == 10)
        .map(|r| r.rows[0].coverage);
    let Some(gumbel_cov) = gumbel_i10 else {
        return (false, "gumbel results unavailable".into());
    };
    if boot_results.is_empty() {
        return (false, "bootstrap results unavailable".into());
    }
    let boot: Vec<f64> = boot_results.iter().map(|r| r.rows[0].coverage).collect();
    let first = boot.iter().all(|&c| c >= gumbel_cov);
    let mut cfg = bootstrap_cell(1.0);
    cfg.model = Model::III;
    let iii = match coverage_experiment(&cfg) {
        Ok(r) => r.rows[0].coverage,
        Err(e) => return (false, format!("error: {e}")),
    };
    let second = iii < boot[0];
    (
        first && second,
        format!(
            "Model I 90%: bootstrap {:?} vs gumbel {gumbel_cov:.1} ({}); Model III bootstrap {iii:.1} < Model I {:.1} ({})",
            boot,
            if first { "ok" } else { "violated" },
            boot[0],
            if second { "ok" } else { "violated" },
        ),
    )
}

fn run_cell_csv(cfg: &ExperimentConfig, threads: usize) -> Result<String, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        let res = coverage_experiment(cfg).map_err(|e| e.to_string())?;
        let prov = Provenance::new("simulate", Some(cfg.seed), cfg.entries());
        let mut out = report_csv(&res.rows, &prov).map_err(|e| e.to_string())?;
        out.push_str(
            &replication_log_csv(&res.records, &cfg.alphas, &prov).map_err(|e| e.to_string())?,
        );
        Ok(out)
    })
}

fn criterion_9() -> (bool, String) {
    let cfg = bootstrap_cell(1.0);
    let runs: Result<Vec<String>, String> = [1, 1, 8, 8]
        .iter()
        .map(|&t| run_cell_csv(&cfg, t))
        .collect();
    match runs {
        Ok(r) => {
            let same = r.windows(2).all(|w| w[0] == w[1]);
            (
                same,
                format!(
                    "4 runs (1, 1, 8, 8 threads), {} bytes each, identical = {same}",
                    r[0].len()
                ),
            )
        }
        Err(e) => (false, format!("error: {e}")),
    }
}

fn criterion_10() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let models = [Model::Iid, Model::I, Model::II, Model::III];
    let mut worst = f64::INFINITY;
    let mut max_clipped: f64 = 0.0;
    let mut total_clipped = 0.0;
    for run in 0..100 {
        let model = models[rng.random_range(0..4)];
        let t = rng.random_range(32..=256);
        let m = rng.random_range(2..=t / 4);
        let b = rng.random_range(0.5..10.0);
        let window = Window::ALL[rng.random_range(0..Window::ALL.len())];
        let x = match simulate(&ModelSpec::new(model, rng.random()), t) {
            Ok(x) => x,
            Err(e) => return (false, format!("run {run}: {e}")),
        };
        let mut s = BandSettings::new(m, CovKernel::gaussian(b).unwrap());
        s.window = window;
        s.bootstrap_reps = 50;
        s.seed = rng.random();
        match bootstrap_statistics(&x, &s) {
            Ok(stats) => {
                let d = stats.diagnostics;
                worst = worst.min(d.relative_min_eigenvalue());
                let rel = d.clipped_mass / d.max_diagonal.max(f64::MIN_POSITIVE);
                max_clipped = max_clipped.max(rel);
                total_clipped += rel;
            }
            Err(e) => {
                return (
                    false,
                    format!("run {run} ({model}, T={t}, M={m}, b={b:.2}): {e}"),
                )
            }
        }
    }
    (
        worst >= -1e-8,
        format!(
            "min relative eigenvalue over 100 runs = {worst:.3e} (tol -1e-8); clipped mass / max diagonal: max {max_clipped:.3e}, mean {:.3e}",
            total_clipped / 100.0
        ),
    )
}

fn main() {
    let mut outcomes = Vec::new();
    let scale = Scale::FULL;

    outcomes.push(timed(1, 1, || {
        let c = checks::parzen_l2();
        (c.passed, c.detail)
    }));

    let start = Instant::now();
    let (c2, boot_results) = criterion_2();
    outcomes.push(Outcome {
        id: 2,
        passed: c2.0,
        detail: c2.1,
        elapsed: start.elapsed(),
        limit: Duration::from_secs(600),
    });

    let start = Instant::now();
    let (c3, gumbel_results) = criterion_3();
    outcomes.push(Outcome {
        id: 3,
        passed: c3.0,
        detail: c3.1,
        elapsed: start.elapsed(),
        limit: Duration::from_secs(180),
    });

    outcomes.push(timed(4, 600, || {
        criterion_4(&boot_results, &gumbel_results)
    }));

    outcomes.push(timed(5, 300, || {
        let parts = [
            checks::banded_sigma_matches_double_sum(),
            checks::isserlis_matches_double_sum(),
            checks::isserlis_matches_monte_carlo(scale.isserlis_mc_reps, SEED),
        ];
        let mut ok = true;
        let mut detail = Vec::new();
        for (tag, p) in ["(a)", "(b)", "(c)"].iter().zip(parts) {
            let (pass, d) = from_check(p);
            ok &= pass;
            detail.push(format!("{tag} {d}"));
        }
        (ok, detail.join("; "))
    }));

    outcomes.push(timed(6, 300, || {
        from_check(checks::variance_approximation_trend())
    }));
    outcomes.push(timed(7, 900, || {
        from_check(checks::gaussian_approximation(
            scale.gauss_sims,
            scale.gauss_draws,
            SEED,
        ))
    }));
    outcomes.push(timed(8, 600, || {
        from_check(checks::sigma_hat_consistency_trend(scale.trend_reps, SEED))
    }));
    outcomes.push(timed(9, 600, criterion_9));
    outcomes.push(timed(10, 300, criterion_10));

    let mut failed = 0;
    for o in &outcomes {
        let in_time = o.elapsed <= o.limit;
        let pass = o.passed && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {} [{:.1}s, limit {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            o.id,
            o.detail,
            o.elapsed.as_secs_f64(),
            o.limit.as_secs(),
            if in_time { "" } else { ", exceeded" },
        );
    }
    println!(
        "{} of {} criteria passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
