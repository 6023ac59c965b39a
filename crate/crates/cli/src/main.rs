use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use specband::band::BandMethod;
use specband::checks::{run_all, Scale};
use specband::config::parse_study;
use specband::io::{
    band_csv, estimate_csv, read_series, replication_log_csv, report_csv, write_atomic, Provenance,
};
use specband::longrun::{CovKernel, KernelShape, DEFAULT_TRUNCATION};
use specband::pipeline::{compute_band, BandSettings};
use specband::series::{autocov, demean, fourier_grid};
use specband::sim::run_study;
use specband::spectral::lag_window_estimate;
use specband::window::Window;
use specband::Error;

#[derive(Parser, Debug)]
#[command(
    name = "specband",
    version,
    about = "Lag-window spectral estimates and simultaneous confidence bands"
)]
struct Cli {
    /// Worker thread cap (0 = all cores).
    #[arg(long, global = true, env = "SPECBAND_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lag-window spectral estimate on the positive Fourier grid.
    Estimate(EstimateArgs),
    /// Simultaneous confidence band for the smoothed spectral density.
    Band(BandArgs),
    /// Coverage study described by a key-value config file.
    Simulate(SimulateArgs),
    /// Compare estimators with exact and brute-force oracles.
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug)]
struct SeriesArgs {
    /// Single-column CSV; an optional header row is skipped.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Truncation lag M.
    #[arg(long)]
    m_lag: usize,
    #[arg(long, default_value_t = Window::Parzen)]
    window: Window,
    /// Use the raw series instead of subtracting its mean.
    #[arg(long)]
    no_demean: bool,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    series: SeriesArgs,
}

#[derive(Args, Debug)]
struct BandArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[arg(long, default_value_t = BandMethod::Bootstrap)]
    method: BandMethod,
    /// Long-run covariance bandwidth b (required for the bootstrap method).
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = KernelShape::Gaussian)]
    cov_kernel: KernelShape,
    /// Kernel argument is divided by this before evaluation.
    #[arg(long, default_value_t = 1.0)]
    kernel_scale: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    bootstrap_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replaces the window's squared L2 norm in the Gumbel half-width.
    #[arg(long)]
    gumbel_w2: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report CSV (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-replication audit log CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Overrides the config's replication count.
    #[arg(long)]
    replications: Option<usize>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Smaller Monte-Carlo sizes.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn series_entries(a: &SeriesArgs, t: usize) -> Vec<(String, String)> {
    vec![
        ("input".into(), a.input.display().to_string()),
        ("T".into(), t.to_string()),
        ("m_lag".into(), a.m_lag.to_string()),
        ("window".into(), a.window.to_string()),
        ("demean".into(), (!a.no_demean).to_string()),
    ]
}

fn check_lag(m: usize, t: usize) -> Result<(), Error> {
    if m == 0 || m >= t {
        return Err(Error::Config(format!(
            "--m-lag must satisfy 1 <= M < T, got M = {m}, T = {t}"
        )));
    }
    Ok(())
}

fn estimate(a: &EstimateArgs) -> Result<(), Error> {
    let s = &a.series;
    let x = read_series(&s.input)?;
    check_lag(s.m_lag, x.len())?;
    let x = if s.no_demean { x } else { demean(&x) };
    let est = lag_window_estimate(
        &autocov(&x, s.m_lag)?,
        s.m_lag,
        s.window,
        &fourier_grid(x.len())?,
    )?;
    if est.has_negative() {
        warn!("spectral estimate has negative values");
    }
    let prov = Provenance::new("estimate", None, series_entries(s, x.len()));
    info!("resolved config:\n{}", prov.header());
    emit(s.output.as_deref(), &estimate_csv(&est, &prov)?)
}

fn band(a: &BandArgs) -> Result<(), Error> {
    let s = &a.series;
    let bandwidth = match (a.method, a.bandwidth) {
        (BandMethod::Bootstrap, None) => {
            return Err(Error::Config(
                "--bandwidth is required for the bootstrap method".into(),
            ))
        }
        (_, b) => b.unwrap_or(1.0),
    };
    if a.method == BandMethod::Bootstrap && a.gumbel_w2.is_some() {
        return Err(Error::Config(
            "--gumbel-w2 only applies to --method gumbel".into(),
        ));
    }
    let kernel = CovKernel::with_scale(a.cov_kernel, bandwidth, a.kernel_scale)?
        .with_truncation(DEFAULT_TRUNCATION);
    let x = read_series(&s.input)?;
    check_lag(s.m_lag, x.len())?;
    let settings = BandSettings {
        m_lag: s.m_lag,
        window: s.window,
        kernel,
        alpha: a.alpha,
        bootstrap_reps: a.bootstrap_reps,
        seed: a.seed,
        eig_clip_tol: specband::band::DEFAULT_EIG_CLIP_TOL,
        demean: !s.no_demean,
        method: a.method,
        gumbel_w2: a.gumbel_w2,
    };
    let mut entries = series_entries(s, x.len());
    entries.push(("method".into(), a.method.to_string()));
    entries.push(("alpha".into(), a.alpha.to_string()));
    match a.method {
        BandMethod::Bootstrap => {
            entries.push(("bandwidth".into(), bandwidth.to_string()));
            entries.push(("cov_kernel".into(), a.cov_kernel.to_string()));
            entries.push(("kernel_scale".into(), a.kernel_scale.to_string()));
            entries.push(("bootstrap_reps".into(), a.bootstrap_reps.to_string()));
        }
        BandMethod::Gumbel => {
            let w2 = a
                .gumbel_w2
                .unwrap_or_else(|| specband::window::window_l2(s.window));
            entries.push(("gumbel_w2".into(), w2.to_string()));
        }
    }
    let seed = (a.method == BandMethod::Bootstrap).then_some(a.seed);
    let prov = Provenance::new("band", seed, entries);
    info!("resolved config:\n{}", prov.header());
    let out = compute_band(&x, &settings)?;
    for w in &out.band.warnings {
        warn!("{w}");
    }
    if let Some(d) = out.diagnostics {
        info!(
            "covariance rank {}, min eigenvalue {:.3e} ({:.3e} of max diagonal), clipped mass {:.3e}",
            d.rank,
            d.min_eigenvalue,
            d.relative_min_eigenvalue(),
            d.clipped_mass
        );
    }
    emit(s.output.as_deref(), &band_csv(&out.band, &prov)?)
}

fn simulate(a: &SimulateArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", a.config.display())))?;
    let mut cfgs = parse_study(&text)?;
    for cfg in &mut cfgs {
        if let Some(r) = a.replications {
            cfg.replications = r;
        }
        if let Some(s) = a.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
    }
    let results = run_study(&cfgs)?;
    let mut entries = vec![("config".to_string(), a.config.display().to_string())];
    for (i, cfg) in cfgs.iter().enumerate() {
        for (k, v) in cfg.entries() {
            entries.push((format!("cell{}.{k}", i + 1), v));
        }
    }
    let prov = Provenance::new("simulate", None, entries);
    info!("resolved config:\n{}", prov.header());
    let rows: Vec<_> = results.iter().flat_map(|r| r.rows.clone()).collect();
    emit(a.output.as_deref(), &report_csv(&rows, &prov)?)?;
    if let Some(path) = &a.log {
        let mut log = String::new();
        for (i, r) in results.iter().enumerate() {
            let cell = Provenance::new(
                &format!("simulate cell {}", i + 1),
                Some(r.config.seed),
                r.config.entries(),
            );
            log.push_str(&replication_log_csv(&r.records, &r.config.alphas, &cell)?);
        }
        write_atomic(path, log.as_bytes())?;
    }
    Ok(())
}

fn oracle_check(a: &OracleArgs) -> Result<bool, Error> {
    let scale = if a.quick { Scale::QUICK } else { Scale::FULL };
    let checks = run_all(scale, a.seed);
    for c in &checks {
        println!("{}", c.line());
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn run(cli: &Cli) -> Result<bool, Error> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Estimate(a) => estimate(a).map(|_| true),
        Command::Band(a) => band(a).map(|_| true),
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::OracleCheck(a) => oracle_check(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
