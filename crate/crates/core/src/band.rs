//! Simultaneous confidence bands: the multiplier bootstrap over all Fourier frequencies
//! and the Gumbel-approximation band on the coarse grid `s * pi / M`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::spectral::SpectralEstimate;
use crate::window::Window;

/// Default relative eigenvalue floor used when factoring the bootstrap covariance.
pub const DEFAULT_EIG_CLIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BandMethod {
    #[default]
    Bootstrap,
    Gumbel,
}

impl BandMethod {
    pub fn name(self) -> &'static str {
        match self {
            BandMethod::Bootstrap => "bootstrap",
            BandMethod::Gumbel => "gumbel",
        }
    }
}

impl fmt::Display for BandMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BandMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(BandMethod::Bootstrap),
            "gumbel" => Ok(BandMethod::Gumbel),
            _ => Err(Error::Config(format!(
                "unknown band method '{s}', expected bootstrap or gumbel"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub eig_clip_tol: f64,
}

impl BootstrapConfig {
    pub fn new(reps: usize, alpha: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            reps,
            alpha,
            seed,
            eig_clip_tol: DEFAULT_EIG_CLIP_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config(
                "bootstrap replications must be at least 1".into(),
            ));
        }
        validate_alpha(self.alpha)
    }
}

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Square-root factor `F` with `F F^T` approximating a symmetric PSD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFactor {
    /// `N x r`; columns are eigenvectors scaled by the square roots of the retained eigenvalues.
    pub factor: DMatrix<f64>,
    /// Smallest eigenvalue before clipping.
    pub min_eigenvalue: f64,
    pub max_diagonal: f64,
    /// Sum of the magnitudes of the negative eigenvalues that were clipped to zero.
    pub clipped_mass: f64,
}

impl PsdFactor {
    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    /// `min_eigenvalue / max_diagonal`, or 0 for the zero matrix.
    pub fn relative_min_eigenvalue(&self) -> f64 {
        if self.max_diagonal > 0.0 {
            self.min_eigenvalue / self.max_diagonal
        } else {
            0.0
        }
    }
}

/// Symmetric eigendecomposition with negative eigenvalues clipped to zero.
///
/// Eigenvalues below `tol * max_diagonal / N` are dropped from the factor as well, so
/// that `max|F F^T - C| <= tol * max_diagonal + clipped_mass`.
pub fn psd_factor(c: &DMatrix<f64>, tol: f64) -> Result<PsdFactor> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "covariance must be square, got {}x{}",
            n,
            c.ncols()
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "covariance matrix has non-finite entries".into(),
        ));
    }
    let max_diagonal = c.diagonal().iter().copied().fold(0.0, f64::max);
    if n == 0 || max_diagonal == 0.0 && c.iter().all(|&v| v == 0.0) {
        return Ok(PsdFactor {
            factor: DMatrix::zeros(n, 0),
            min_eigenvalue: 0.0,
            max_diagonal,
            clipped_mass: 0.0,
        });
    }
    let eig = SymmetricEigen::new(c.clone());
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigendecomposition did not converge".into()));
    }
    let min_eigenvalue = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let clipped_mass: f64 = eig
        .eigenvalues
        .iter()
        .filter(|&&v| v < 0.0)
        .map(|v| -v)
        .sum();
    let cutoff = tol * max_diagonal / n as f64;
    let mut order: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut factor = DMatrix::zeros(n, order.len());
    for (col, &i) in order.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for row in 0..n {
            factor[(row, col)] = eig.eigenvectors[(row, i)] * s;
        }
    }
    Ok(PsdFactor {
        factor,
        min_eigenvalue,
        max_diagonal,
        clipped_mass,
    })
}

/// `max_k |xi_k|` for `xi = F z`, one value per bootstrap replication, in replication order.
///
/// Replication `b` draws its normals from its own generator derived from `(seed, b)`.
pub fn bootstrap_maxima(factor: &PsdFactor, reps: usize, seed: u64) -> Vec<f64> {
    let f = &factor.factor;
    let (n, r) = f.shape();
    if r == 0 {
        return vec![0.0; reps];
    }
    (0..reps)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |xi, b| {
                let mut rng = stream_rng(seed, Stream::Bootstrap, b as u64);
                xi.iter_mut().for_each(|v| *v = 0.0);
                for col in 0..r {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    for (v, a) in xi.iter_mut().zip(f.column(col).iter()) {
                        *v += a * z;
                    }
                }
                xi.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            },
        )
        .collect()
}

/// Order statistic of rank `ceil(n (1 - alpha))` (1-based) of already sorted values.
pub fn upper_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let rank = ((n as f64) * (1.0 - alpha) - 1e-9)
        .ceil()
        .clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub q_star: f64,
    pub reps: usize,
    pub mean_max: f64,
    pub warnings: Vec<String>,
}

pub fn bootstrap_quantile(factor: &PsdFactor, cfg: &BootstrapConfig) -> Result<BootstrapSummary> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    if (cfg.reps as f64) < 20.0 / cfg.alpha {
        let msg = format!(
            "{} bootstrap replications is fewer than 20/alpha = {:.0}; the quantile is unstable",
            cfg.reps,
            20.0 / cfg.alpha
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let mut maxima = bootstrap_maxima(factor, cfg.reps, cfg.seed);
    let mean_max = maxima.iter().sum::<f64>() / maxima.len() as f64;
    maxima.sort_by(f64::total_cmp);
    Ok(BootstrapSummary {
        q_star: upper_quantile(&maxima, cfg.alpha),
        reps: cfg.reps,
        mean_max,
        warnings,
    })
}

/// Settings echoed alongside a band.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub series_len: usize,
    pub m_lag: usize,
    pub window: Window,
    pub bandwidth: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandResult {
    pub method: BandMethod,
    pub lambdas: Vec<f64>,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `q*` for the bootstrap band; the mean half-width for the Gumbel band.
    pub quantile: f64,
    pub alpha: f64,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
}

impl BandResult {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Whether every `target[k]` lies inside `[lower[k], upper[k]]`.
    pub fn covers(&self, target: &[f64]) -> bool {
        target.len() == self.len()
            && target
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&f, (&lo, &hi))| lo <= f && f <= hi)
    }

    pub fn mean_width(&self) -> f64 {
        self.upper
            .iter()
            .zip(&self.lower)
            .map(|(u, l)| u - l)
            .sum::<f64>()
            / self.len() as f64
    }
}

/// `f_hat (1 -+ q* sqrt(M/T))` at every frequency of `est`.
pub fn bootstrap_band(est: &SpectralEstimate, q_star: f64, alpha: f64) -> Result<BandResult> {
    if !(q_star >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "q* must be nonnegative, got {q_star}"
        )));
    }
    let rel = q_star * (est.m_lag as f64 / est.series_len as f64).sqrt();
    let (lower, upper) = est
        .values
        .iter()
        .map(|&f| {
            let (a, b) = (f * (1.0 - rel), f * (1.0 + rel));
            (a.min(b), a.max(b))
        })
        .unzip();
    Ok(BandResult {
        method: BandMethod::Bootstrap,
        lambdas: est.lambdas.clone(),
        center: est.values.clone(),
        lower,
        upper,
        quantile: q_star,
        alpha,
        provenance: Provenance {
            series_len: est.series_len,
            m_lag: est.m_lag,
            window: est.window,
            bandwidth: None,
            seed: None,
        },
        warnings: Vec::new(),
    })
}

/// Coarse grid `s * pi / M` for `s = 1..=M`.
pub fn gumbel_grid(m_lag: usize) -> Vec<f64> {
    (1..=m_lag).map(|s| s as f64 * PI / m_lag as f64).collect()
}

/// Upper `(1 - alpha)` point of the standard Gumbel distribution.
pub fn gumbel_quantile(alpha: f64) -> f64 {
    -(-(1.0 - alpha).ln()).ln()
}

/// Centering constant `2 log M - log(pi log M)`.
pub fn gumbel_centering(m_lag: usize) -> f64 {
    let lm = (m_lag as f64).ln();
    2.0 * lm - (PI * lm).ln()
}

/// Gumbel band `f_hat(lambda_s) +- sqrt((M/T)(c + mu) f_hat^2 W2)` on the coarse grid.
pub fn gumbel_band(
    est: &SpectralEstimate,
    m_lag: usize,
    series_len: usize,
    alpha: f64,
    w2: f64,
) -> Result<BandResult> {
    validate_alpha(alpha)?;
    if m_lag < 2 {
        return Err(Error::Config(format!(
            "the Gumbel band needs M >= 2, got {m_lag}"
        )));
    }
    if est.len() != m_lag {
        return Err(Error::InvalidInput(format!(
            "expected {m_lag} coarse-grid values, got {}",
            est.len()
        )));
    }
    let level = gumbel_quantile(alpha) + gumbel_centering(m_lag);
    if level < 0.0 {
        return Err(Error::Config(format!(
            "Gumbel quantile plus centering is negative ({level:.4}) for alpha = {alpha}, M = {m_lag}"
        )));
    }
    let factor = (m_lag as f64 / series_len as f64 * level * w2).sqrt();
    let half: Vec<f64> = est.values.iter().map(|f| factor * f.abs()).collect();
    let lower = est.values.iter().zip(&half).map(|(f, h)| f - h).collect();
    let upper = est.values.iter().zip(&half).map(|(f, h)| f + h).collect();
    Ok(BandResult {
        method: BandMethod::Gumbel,
        lambdas: est.lambdas.clone(),
        center: est.values.clone(),
        lower,
        upper,
        quantile: half.iter().sum::<f64>() / half.len() as f64,
        alpha,
        provenance: Provenance {
            series_len,
            m_lag,
            window: est.window,
            bandwidth: None,
            seed: None,
        },
        warnings: Vec::new(),
    })
}
