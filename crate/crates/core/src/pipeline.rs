//! End-to-end band construction from a single observed series.

use crate::band::{
    bootstrap_band, bootstrap_maxima, gumbel_band, gumbel_grid, psd_factor, upper_quantile,
    validate_alpha, BandMethod, BandResult, BootstrapConfig, DEFAULT_EIG_CLIP_TOL,
};
use crate::error::{Error, Result};
use crate::longrun::{multiplier_cov, sigma_hat, CovKernel};
use crate::series::{autocov, demean, fourier_grid, TimeSeries};
use crate::spectral::{coefficients, lag_window_at, lag_window_estimate, SpectralEstimate};
use crate::window::{window_l2, Window};

/// Everything needed to turn a series into a band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSettings {
    pub m_lag: usize,
    pub window: Window,
    pub kernel: CovKernel,
    pub alpha: f64,
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub eig_clip_tol: f64,
    pub demean: bool,
    pub method: BandMethod,
    /// Replaces the window's `W2` in the Gumbel half-width.
    pub gumbel_w2: Option<f64>,
}

impl BandSettings {
    pub fn new(m_lag: usize, kernel: CovKernel) -> Self {
        Self {
            m_lag,
            window: Window::Parzen,
            kernel,
            alpha: 0.1,
            bootstrap_reps: 1000,
            seed: 0,
            eig_clip_tol: DEFAULT_EIG_CLIP_TOL,
            demean: true,
            method: BandMethod::Bootstrap,
            gumbel_w2: None,
        }
    }
}

/// Eigen-diagnostics of the bootstrap covariance before clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorDiagnostics {
    pub min_eigenvalue: f64,
    pub max_diagonal: f64,
    pub clipped_mass: f64,
    pub rank: usize,
    pub clamped_divisors: usize,
}

impl FactorDiagnostics {
    pub fn relative_min_eigenvalue(&self) -> f64 {
        if self.max_diagonal > 0.0 {
            self.min_eigenvalue / self.max_diagonal
        } else {
            0.0
        }
    }
}

/// Spectral estimate plus the sorted bootstrap maxima, from which the quantile for any
/// `alpha` can be read off.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapStats {
    pub estimate: SpectralEstimate,
    pub sorted_maxima: Vec<f64>,
    pub diagnostics: FactorDiagnostics,
}

impl BootstrapStats {
    pub fn q_star(&self, alpha: f64) -> f64 {
        upper_quantile(&self.sorted_maxima, alpha)
    }
}

fn prepare(series: &TimeSeries, demean_first: bool) -> TimeSeries {
    if demean_first {
        demean(series)
    } else {
        series.clone()
    }
}

/// Runs the multiplier bootstrap on the positive Fourier grid.
/// Uses every field of `settings` except `alpha` and `method`.
pub fn bootstrap_statistics(
    series: &TimeSeries,
    settings: &BandSettings,
) -> Result<BootstrapStats> {
    let BandSettings {
        m_lag,
        window,
        ref kernel,
        bootstrap_reps: reps,
        seed,
        eig_clip_tol,
        demean: demean_first,
        ..
    } = *settings;
    if reps == 0 {
        return Err(Error::Config(
            "bootstrap replications must be at least 1".into(),
        ));
    }
    if m_lag == 0 {
        return Err(Error::Config("truncation lag must be at least 1".into()));
    }
    let x = prepare(series, demean_first);
    let acov = autocov(&x, m_lag)?;
    let grid = fourier_grid(x.len())?;
    let estimate = lag_window_estimate(&acov, m_lag, window, &grid)?;
    let coefs = coefficients(m_lag, window, grid.frequencies())?;
    let lrc = sigma_hat(&x, &acov, m_lag, kernel)?;
    let cov = multiplier_cov(&estimate, &coefs, &lrc)?;
    let factor = psd_factor(&cov.matrix, eig_clip_tol)?;
    let mut sorted_maxima = bootstrap_maxima(&factor, reps, seed);
    sorted_maxima.sort_by(f64::total_cmp);
    Ok(BootstrapStats {
        estimate,
        sorted_maxima,
        diagnostics: FactorDiagnostics {
            min_eigenvalue: factor.min_eigenvalue,
            max_diagonal: factor.max_diagonal,
            clipped_mass: factor.clipped_mass,
            rank: factor.rank(),
            clamped_divisors: cov.clamped.len(),
        },
    })
}

/// Lag-window estimate on the coarse Gumbel grid.
pub fn coarse_estimate(
    series: &TimeSeries,
    m_lag: usize,
    window: Window,
    demean_first: bool,
) -> Result<SpectralEstimate> {
    let x = prepare(series, demean_first);
    let acov = autocov(&x, m_lag)?;
    lag_window_at(&acov, m_lag, window, &gumbel_grid(m_lag))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandOutcome {
    pub band: BandResult,
    pub diagnostics: Option<FactorDiagnostics>,
}

/// Builds the band selected by `settings.method`.
pub fn compute_band(series: &TimeSeries, settings: &BandSettings) -> Result<BandOutcome> {
    validate_alpha(settings.alpha)?;
    match settings.method {
        BandMethod::Bootstrap => {
            let cfg = BootstrapConfig {
                reps: settings.bootstrap_reps,
                alpha: settings.alpha,
                seed: settings.seed,
                eig_clip_tol: settings.eig_clip_tol,
            };
            cfg.validate()?;
            let stats = bootstrap_statistics(series, settings)?;
            let mut band = bootstrap_band(&stats.estimate, stats.q_star(cfg.alpha), cfg.alpha)?;
            band.provenance.bandwidth = Some(settings.kernel.bandwidth);
            band.provenance.seed = Some(settings.seed);
            if (cfg.reps as f64) < 20.0 / cfg.alpha {
                band.warnings.push(format!(
                    "{} bootstrap replications is fewer than 20/alpha; the quantile is unstable",
                    cfg.reps
                ));
            }
            if stats.diagnostics.clamped_divisors > 0 {
                band.warnings.push(format!(
                    "{} nonpositive spectral estimate(s) clamped in the covariance divisor",
                    stats.diagnostics.clamped_divisors
                ));
            }
            if stats.estimate.has_negative() {
                band.warnings
                    .push("spectral estimate has negative values".into());
            }
            Ok(BandOutcome {
                band,
                diagnostics: Some(stats.diagnostics),
            })
        }
        BandMethod::Gumbel => {
            let est = coarse_estimate(series, settings.m_lag, settings.window, settings.demean)?;
            let band = gumbel_band(
                &est,
                settings.m_lag,
                series.len(),
                settings.alpha,
                settings
                    .gumbel_w2
                    .unwrap_or_else(|| window_l2(settings.window)),
            )?;
            Ok(BandOutcome {
                band,
                diagnostics: None,
            })
        }
    }
}
