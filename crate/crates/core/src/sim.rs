//! Data-generating processes and Monte-Carlo coverage experiments.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::band::{gumbel_band, gumbel_grid};
use crate::band::{validate_alpha, BandMethod, DEFAULT_EIG_CLIP_TOL};
use crate::error::{Error, Result};
use crate::longrun::{CovKernel, KernelShape, DEFAULT_TRUNCATION};
use crate::oracle::LinearProcessSpec;
use crate::pipeline::{bootstrap_statistics, coarse_estimate, BandSettings};
use crate::rng::{derive_seed, rng_from_seed, Stream};
use crate::series::{autocov, demean, fourier_grid, TimeSeries};
use crate::spectral::{lag_window_at, smoothed_target, SpectralEstimate};
use crate::window::{window_l2, Window};

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_TARGET_REPS: usize = 20_000;

/// Simulation models. All innovations are i.i.d. standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// `X_t = e_t`.
    Iid,
    /// `X_t = 0.8 X_{t-1} + e_t`.
    I,
    /// `X_t = 1.3 X_{t-1} - 0.75 X_{t-2} + u_t`, `u_t = e_t sqrt(1 + 0.25 u_{t-1}^2)`.
    II,
    /// `X_t = (0.4 + 0.1 e_{t-1}) X_{t-1} + e_t`.
    III,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Iid => "iid",
            Model::I => "I",
            Model::II => "II",
            Model::III => "III",
        }
    }

    /// The Gaussian linear representation, when the model has one.
    pub fn linear_spec(self) -> Option<LinearProcessSpec> {
        match self {
            Model::Iid => LinearProcessSpec::white_noise(1.0).ok(),
            Model::I => LinearProcessSpec::ar1(0.8).ok(),
            Model::II | Model::III => None,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iid" | "i.i.d." | "white-noise" => Ok(Model::Iid),
            "i" | "1" | "model-i" => Ok(Model::I),
            "ii" | "2" | "model-ii" => Ok(Model::II),
            "iii" | "3" | "model-iii" => Ok(Model::III),
            _ => Err(Error::Config(format!(
                "unknown model '{s}', expected one of: iid, I, II, III"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub model: Model,
    pub seed: u64,
    pub burn_in: usize,
}

impl ModelSpec {
    pub fn new(model: Model, seed: u64) -> Self {
        Self {
            model,
            seed,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

/// Generates `burn_in + len` steps from zero initial conditions and keeps the last `len`.
pub fn simulate(spec: &ModelSpec, len: usize) -> Result<TimeSeries> {
    let mut rng = rng_from_seed(spec.seed);
    let mut eps = move || -> f64 { StandardNormal.sample(&mut rng) };
    let steps = spec.burn_in + len;
    let mut out = Vec::with_capacity(len);
    let mut keep = |i: usize, v: f64| {
        if i >= spec.burn_in {
            out.push(v);
        }
    };
    match spec.model {
        Model::Iid => {
            for i in 0..steps {
                keep(i, eps());
            }
        }
        Model::I => {
            let mut x = 0.0;
            for i in 0..steps {
                x = 0.8 * x + eps();
                keep(i, x);
            }
        }
        Model::II => {
            let (mut x1, mut x2, mut u) = (0.0, 0.0, 0.0f64);
            for i in 0..steps {
                u = eps() * (1.0 + 0.25 * u * u).sqrt();
                let x = 1.3 * x1 - 0.75 * x2 + u;
                x2 = x1;
                x1 = x;
                keep(i, x);
            }
        }
        Model::III => {
            let (mut x, mut e_prev) = (0.0, 0.0);
            for i in 0..steps {
                let e = eps();
                x = (0.4 + 0.1 * e_prev) * x + e;
                e_prev = e;
                keep(i, x);
            }
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Generation {
            seed: spec.seed,
            message: format!("model {} produced a non-finite value", spec.model),
        });
    }
    TimeSeries::new(out).map_err(|e| Error::Generation {
        seed: spec.seed,
        message: e.to_string(),
    })
}

/// How the band target `E f_hat` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TargetMode {
    /// Analytic for models with a linear representation, Monte Carlo otherwise.
    #[default]
    Auto,
    Analytic,
    MonteCarlo,
}

impl TargetMode {
    pub fn name(self) -> &'static str {
        match self {
            TargetMode::Auto => "auto",
            TargetMode::Analytic => "analytic",
            TargetMode::MonteCarlo => "mc",
        }
    }
}

impl FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(TargetMode::Auto),
            "analytic" => Ok(TargetMode::Analytic),
            "mc" | "monte-carlo" => Ok(TargetMode::MonteCarlo),
            _ => Err(Error::Config(format!(
                "unknown target mode '{s}', expected auto, analytic or mc"
            ))),
        }
    }
}

/// One cell of a coverage study.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub series_len: usize,
    pub m_lag: usize,
    pub bandwidth: f64,
    pub alphas: Vec<f64>,
    pub replications: usize,
    pub bootstrap_reps: usize,
    pub window: Window,
    pub method: BandMethod,
    pub target: TargetMode,
    pub target_reps: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub demean: bool,
    pub kernel: KernelShape,
    pub kernel_scale: f64,
    pub truncation: f64,
    pub eig_clip_tol: f64,
    /// Overrides the window's `W2` in the Gumbel half-width.
    pub gumbel_w2: Option<f64>,
}

impl ExperimentConfig {
    /// Desk-scale defaults: 200 replications, 1000 bootstrap draws, Parzen window.
    pub fn new(model: Model, series_len: usize, m_lag: usize, bandwidth: f64) -> Self {
        Self {
            model,
            series_len,
            m_lag,
            bandwidth,
            alphas: vec![0.1, 0.05],
            replications: 200,
            bootstrap_reps: 1000,
            window: Window::Parzen,
            method: BandMethod::Bootstrap,
            target: TargetMode::Auto,
            target_reps: DEFAULT_TARGET_REPS,
            seed: 1,
            burn_in: DEFAULT_BURN_IN,
            demean: true,
            kernel: KernelShape::Gaussian,
            kernel_scale: 1.0,
            truncation: DEFAULT_TRUNCATION,
            eig_clip_tol: DEFAULT_EIG_CLIP_TOL,
            gumbel_w2: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.bootstrap_reps == 0 {
            return Err(Error::Config(
                "bootstrap replications must be at least 1".into(),
            ));
        }
        if self.m_lag == 0 || self.m_lag >= self.series_len {
            return Err(Error::Config(format!(
                "truncation lag must satisfy 1 <= M < T, got M = {}, T = {}",
                self.m_lag, self.series_len
            )));
        }
        if self.alphas.is_empty() {
            return Err(Error::Config("at least one alpha is required".into()));
        }
        for &a in &self.alphas {
            validate_alpha(a)?;
        }
        if self.method == BandMethod::Gumbel && self.m_lag < 2 {
            return Err(Error::Config("the Gumbel band needs M >= 2".into()));
        }
        if let Some(w2) = self.gumbel_w2 {
            if !(w2.is_finite() && w2 > 0.0) {
                return Err(Error::Config(format!(
                    "gumbel_w2 must be positive, got {w2}"
                )));
            }
        }
        if self.target == TargetMode::Analytic && self.model.linear_spec().is_none() {
            return Err(Error::Config(format!(
                "model {} has no analytic target; use target = mc",
                self.model
            )));
        }
        if self.resolved_target() == TargetMode::MonteCarlo && self.target_reps == 0 {
            return Err(Error::Config(
                "target replications must be at least 1".into(),
            ));
        }
        self.cov_kernel().map(|_| ())
    }

    pub fn cov_kernel(&self) -> Result<CovKernel> {
        Ok(
            CovKernel::with_scale(self.kernel, self.bandwidth, self.kernel_scale)?
                .with_truncation(self.truncation),
        )
    }

    pub fn resolved_w2(&self) -> f64 {
        self.gumbel_w2.unwrap_or_else(|| window_l2(self.window))
    }

    pub fn resolved_target(&self) -> TargetMode {
        match (self.target, self.model.linear_spec()) {
            (TargetMode::Auto, Some(_)) => TargetMode::Analytic,
            (TargetMode::Auto, None) => TargetMode::MonteCarlo,
            (mode, _) => mode,
        }
    }

    /// Frequencies the band is evaluated on.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        Ok(match self.method {
            BandMethod::Bootstrap => fourier_grid(self.series_len)?.frequencies().to_vec(),
            BandMethod::Gumbel => gumbel_grid(self.m_lag),
        })
    }

    fn band_settings(&self, seed: u64) -> Result<BandSettings> {
        Ok(BandSettings {
            m_lag: self.m_lag,
            window: self.window,
            kernel: self.cov_kernel()?,
            alpha: self.alphas[0],
            bootstrap_reps: self.bootstrap_reps,
            seed,
            eig_clip_tol: self.eig_clip_tol,
            demean: self.demean,
            method: self.method,
            gumbel_w2: self.gumbel_w2,
        })
    }

    /// Fully resolved settings as `(key, value)` pairs, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let alphas: Vec<String> = self.alphas.iter().map(|a| a.to_string()).collect();
        let mut e = vec![
            ("model", self.model.to_string()),
            ("T", self.series_len.to_string()),
            ("m_lag", self.m_lag.to_string()),
            ("bandwidth", self.bandwidth.to_string()),
            ("alpha", alphas.join(",")),
            ("replications", self.replications.to_string()),
            ("bootstrap_reps", self.bootstrap_reps.to_string()),
            ("window", self.window.to_string()),
            ("method", self.method.to_string()),
            ("target", self.resolved_target().name().to_string()),
            ("target_reps", self.target_reps.to_string()),
            ("seed", self.seed.to_string()),
            ("burn_in", self.burn_in.to_string()),
            ("demean", self.demean.to_string()),
            ("cov_kernel", self.kernel.to_string()),
            ("kernel_scale", self.kernel_scale.to_string()),
            ("truncation", self.truncation.to_string()),
            ("eig_clip_tol", self.eig_clip_tol.to_string()),
            ("gumbel_w2", self.resolved_w2().to_string()),
        ];
        let dropped: &[&str] = match self.method {
            BandMethod::Bootstrap => &["gumbel_w2"],
            BandMethod::Gumbel => &[
                "bandwidth",
                "bootstrap_reps",
                "cov_kernel",
                "kernel_scale",
                "truncation",
                "eig_clip_tol",
            ],
        };
        e.retain(|(k, _)| !dropped.contains(k));
        e.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// The band target `E f_hat` on the experiment's frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub curve: SpectralEstimate,
    /// Monte-Carlo standard errors, when the curve was obtained by simulation.
    pub std_error: Option<Vec<f64>>,
    pub mode: TargetMode,
}

/// Average of `f_hat` over `reps` independent series at `lambdas`, with standard errors.
pub fn mc_target(
    model: Model,
    series_len: usize,
    m_lag: usize,
    window: Window,
    lambdas: &[f64],
    reps: usize,
    seed: u64,
    burn_in: usize,
    demean_first: bool,
) -> Result<(SpectralEstimate, Vec<f64>)> {
    const CHUNK: usize = 250;
    let n = lambdas.len();
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut sum = vec![0.0; n];
            let mut sq = vec![0.0; n];
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(reps) {
                let spec = ModelSpec {
                    model,
                    seed: derive_seed(seed, Stream::Target, i as u64),
                    burn_in,
                };
                let mut x = simulate(&spec, series_len)?;
                if demean_first {
                    x = demean(&x);
                }
                let acov = autocov(&x, m_lag)?;
                let est = lag_window_at(&acov, m_lag, window, lambdas)?;
                for (k, v) in est.values.iter().enumerate() {
                    sum[k] += v;
                    sq[k] += v * v;
                }
            }
            Ok((sum, sq))
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for (s, q) in &chunks {
        for k in 0..n {
            sum[k] += s[k];
            sq[k] += q[k];
        }
    }
    let r = reps as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / r).collect();
    let se = mean
        .iter()
        .zip(&sq)
        .map(|(m, q)| {
            let var = if reps > 1 {
                ((q / r) - m * m).max(0.0) * r / (r - 1.0)
            } else {
                0.0
            };
            (var / r).sqrt()
        })
        .collect();
    Ok((
        SpectralEstimate {
            lambdas: lambdas.to_vec(),
            values: mean,
            series_len,
            m_lag,
            window,
        },
        se,
    ))
}

/// The reference curve the band is meant to cover.
pub fn target_curve(cfg: &ExperimentConfig) -> Result<Target> {
    let lambdas = cfg.frequencies()?;
    match cfg.resolved_target() {
        TargetMode::MonteCarlo => {
            let (curve, se) = mc_target(
                cfg.model,
                cfg.series_len,
                cfg.m_lag,
                cfg.window,
                &lambdas,
                cfg.target_reps,
                cfg.seed,
                cfg.burn_in,
                cfg.demean,
            )?;
            Ok(Target {
                curve,
                std_error: Some(se),
                mode: TargetMode::MonteCarlo,
            })
        }
        _ => {
            let spec = cfg.model.linear_spec().ok_or_else(|| {
                Error::Config(format!("model {} has no analytic target", cfg.model))
            })?;
            let gamma = spec.autocov(cfg.series_len);
            let curve = smoothed_target(
                &gamma,
                cfg.m_lag,
                cfg.series_len,
                cfg.window,
                &lambdas,
                cfg.demean,
            )?;
            Ok(Target {
                curve,
                std_error: None,
                mode: TargetMode::Analytic,
            })
        }
    }
}

/// Summary of one experiment cell at one confidence level.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: Model,
    pub method: BandMethod,
    pub series_len: usize,
    pub m_lag: usize,
    pub bandwidth: Option<f64>,
    pub alpha: f64,
    pub replications: usize,
    pub bootstrap_reps: Option<usize>,
    /// Percentage of replications whose band covered the target at every frequency.
    pub coverage: f64,
    pub mean_length: f64,
}

/// Per-replication artifacts, kept for auditing the report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    /// Mean of `f_hat` over the band's frequencies.
    pub mean_estimate: f64,
    /// `q*` (bootstrap) or mean half-width (Gumbel), one per alpha.
    pub quantiles: Vec<f64>,
    pub covered: Vec<bool>,
    pub min_eig_relative: Option<f64>,
    pub clipped_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub records: Vec<ReplicationRecord>,
    pub target: Target,
}

/// `2 sqrt(M/T) * mean(f_hat) * mean(q*)`, averaging `f_hat` over frequencies and replications.
pub fn bootstrap_mean_length(
    records: &[ReplicationRecord],
    alpha_index: usize,
    m_lag: usize,
    series_len: usize,
) -> f64 {
    let r = records.len() as f64;
    let f_bar = records.iter().map(|rec| rec.mean_estimate).sum::<f64>() / r;
    let q_bar = records
        .iter()
        .map(|rec| rec.quantiles[alpha_index])
        .sum::<f64>()
        / r;
    2.0 * (m_lag as f64 / series_len as f64).sqrt() * f_bar * q_bar
}

fn run_replication(
    cfg: &ExperimentConfig,
    target: &[f64],
    w2: f64,
    index: usize,
) -> Result<ReplicationRecord> {
    let seed = derive_seed(cfg.seed, Stream::Replication, index as u64);
    let series = simulate(
        &ModelSpec {
            model: cfg.model,
            seed: derive_seed(seed, Stream::Series, 0),
            burn_in: cfg.burn_in,
        },
        cfg.series_len,
    )?;
    match cfg.method {
        BandMethod::Bootstrap => {
            let settings = cfg.band_settings(derive_seed(seed, Stream::Bootstrap, 0))?;
            let stats = bootstrap_statistics(&series, &settings)?;
            let est = &stats.estimate;
            let rel = (cfg.m_lag as f64 / cfg.series_len as f64).sqrt();
            let mut quantiles = Vec::with_capacity(cfg.alphas.len());
            let mut covered = Vec::with_capacity(cfg.alphas.len());
            for &alpha in &cfg.alphas {
                let q = stats.q_star(alpha);
                let inside = est.values.iter().zip(target).all(|(&f, &g)| {
                    let (a, b) = (f * (1.0 - q * rel), f * (1.0 + q * rel));
                    a.min(b) <= g && g <= a.max(b)
                });
                quantiles.push(q);
                covered.push(inside);
            }
            Ok(ReplicationRecord {
                index,
                seed,
                mean_estimate: est.mean(),
                quantiles,
                covered,
                min_eig_relative: Some(stats.diagnostics.relative_min_eigenvalue()),
                clipped_mass: Some(stats.diagnostics.clipped_mass),
            })
        }
        BandMethod::Gumbel => {
            let est = coarse_estimate(&series, cfg.m_lag, cfg.window, cfg.demean)?;
            let mut quantiles = Vec::with_capacity(cfg.alphas.len());
            let mut covered = Vec::with_capacity(cfg.alphas.len());
            for &alpha in &cfg.alphas {
                let band = gumbel_band(&est, cfg.m_lag, cfg.series_len, alpha, w2)?;
                quantiles.push(band.quantile);
                covered.push(band.covers(target));
            }
            Ok(ReplicationRecord {
                index,
                seed,
                mean_estimate: est.mean(),
                quantiles,
                covered,
                min_eig_relative: None,
                clipped_mass: None,
            })
        }
    }
}

/// Runs `cfg.replications` independent simulate-estimate-band cycles against `target`.
pub fn coverage_experiment_with_target(
    cfg: &ExperimentConfig,
    target: Target,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let w2 = cfg.resolved_w2();
    let records: Vec<ReplicationRecord> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| {
            run_replication(cfg, &target.curve.values, w2, i).map_err(|e| Error::Replication {
                index: i,
                seed: derive_seed(cfg.seed, Stream::Replication, i as u64),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let r = records.len() as f64;
    let rows = cfg
        .alphas
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let hits = records.iter().filter(|rec| rec.covered[a]).count() as f64;
            let mean_length = match cfg.method {
                BandMethod::Bootstrap => {
                    bootstrap_mean_length(&records, a, cfg.m_lag, cfg.series_len)
                }
                BandMethod::Gumbel => {
                    2.0 * records.iter().map(|rec| rec.quantiles[a]).sum::<f64>() / r
                }
            };
            let bootstrap = cfg.method == BandMethod::Bootstrap;
            ReportRow {
                model: cfg.model,
                method: cfg.method,
                series_len: cfg.series_len,
                m_lag: cfg.m_lag,
                bandwidth: bootstrap.then_some(cfg.bandwidth),
                alpha,
                replications: cfg.replications,
                bootstrap_reps: bootstrap.then_some(cfg.bootstrap_reps),
                coverage: 100.0 * hits / r,
                mean_length,
            }
        })
        .collect();
    Ok(ExperimentResult {
        config: cfg.clone(),
        rows,
        records,
        target,
    })
}

pub fn coverage_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let target = target_curve(cfg)?;
    coverage_experiment_with_target(cfg, target)
}

/// Runs several cells, computing each distinct target curve once.
pub fn run_study(cfgs: &[ExperimentConfig]) -> Result<Vec<ExperimentResult>> {
    type Key = (
        Model,
        usize,
        usize,
        Window,
        BandMethod,
        TargetMode,
        usize,
        u64,
        usize,
        bool,
    );
    let mut cache: HashMap<Key, Target> = HashMap::new();
    let mut out = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        cfg.validate()?;
        let key = (
            cfg.model,
            cfg.series_len,
            cfg.m_lag,
            cfg.window,
            cfg.method,
            cfg.resolved_target(),
            cfg.target_reps,
            cfg.seed,
            cfg.burn_in,
            cfg.demean,
        );
        let target = match cache.get(&key) {
            Some(t) => t.clone(),
            None => {
                let t = target_curve(cfg)?;
                cache.insert(key, t.clone());
                t
            }
        };
        out.push(coverage_experiment_with_target(cfg, target)?);
    }
    Ok(out)
}
