//! Lag-window spectral density estimates, the linear coefficients behind them, and the
//! exact finite-sample expectation of the estimator for processes with known autocovariances.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::series::{AutocovSeq, FourierGrid};
use crate::window::Window;

/// Estimator values on a set of frequencies in `(0, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub series_len: usize,
    pub m_lag: usize,
    pub window: Window,
}

impl SpectralEstimate {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True when some value is negative, which can happen for windows with a
    /// non-positive spectral window.
    pub fn has_negative(&self) -> bool {
        self.min() < 0.0
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// `(1/2pi) [g(0) + 2 sum_{j=1..M} weight_j cos(j lambda) g(j)]` for each lambda.
fn cosine_series(lagged: &[f64], lambdas: &[f64]) -> Vec<f64> {
    lambdas
        .iter()
        .map(|&lambda| {
            let tail: f64 = lagged
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, g)| (j as f64 * lambda).cos() * g)
                .sum();
            (lagged[0] + 2.0 * tail) / (2.0 * PI)
        })
        .collect()
}

/// Evaluates the lag-window estimator at arbitrary frequencies.
pub fn lag_window_at(
    acov: &AutocovSeq,
    m_lag: usize,
    window: Window,
    lambdas: &[f64],
) -> Result<SpectralEstimate> {
    let t = acov.series_len();
    if m_lag >= t {
        return Err(Error::Range(format!(
            "truncation lag {m_lag} must be smaller than T = {t}"
        )));
    }
    if acov.max_lag() < m_lag {
        return Err(Error::Range(format!(
            "autocovariances cover lags up to {}, need {m_lag}",
            acov.max_lag()
        )));
    }
    let weights = window.weights(m_lag);
    let lagged: Vec<f64> = weights
        .iter()
        .zip(acov.gamma())
        .map(|(w, g)| w * g)
        .collect();
    Ok(SpectralEstimate {
        lambdas: lambdas.to_vec(),
        values: cosine_series(&lagged, lambdas),
        series_len: t,
        m_lag,
        window,
    })
}

/// Lag-window estimate on the positive Fourier frequencies.
pub fn lag_window_estimate(
    acov: &AutocovSeq,
    m_lag: usize,
    window: Window,
    grid: &FourierGrid,
) -> Result<SpectralEstimate> {
    lag_window_at(acov, m_lag, window, grid.frequencies())
}

/// Weights `a[k][j]` writing the centered, rescaled estimator at frequency `k` as a
/// linear combination of lagged-product sums. Rows are frequencies, columns lags `0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefMatrix {
    pub matrix: DMatrix<f64>,
    pub m_lag: usize,
}

impl CoefMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest squared row norm, `max_k sum_j a[k][j]^2`.
    pub fn max_row_energy(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.norm_squared())
            .fold(0.0, f64::max)
    }
}

pub fn coefficients(m_lag: usize, window: Window, lambdas: &[f64]) -> Result<CoefMatrix> {
    if m_lag == 0 {
        return Err(Error::Range("truncation lag must be at least 1".into()));
    }
    let root_m = (m_lag as f64).sqrt();
    let weights = window.weights(m_lag);
    let matrix = DMatrix::from_fn(lambdas.len(), m_lag + 1, |k, j| {
        if j == 0 {
            1.0 / (2.0 * PI * root_m)
        } else {
            weights[j] * (j as f64 * lambdas[k]).cos() / (PI * root_m)
        }
    });
    Ok(CoefMatrix { matrix, m_lag })
}

/// Exact expectation of the divisor-`T` sample autocovariances at lags `0..=m_lag`
/// for a zero-mean stationary process with autocovariances `gamma`.
///
/// Without de-meaning this is `(1 - j/T) gamma(j)`. With de-meaning the sample mean
/// contributes the correction
/// `E[(X_t - m)(X_u - m)] = gamma(t-u) - c_t - c_u + v`, where `c_t = (1/T) sum_s gamma(t-s)`
/// and `v` is the variance of the sample mean; this needs `gamma` up to lag `T - 1`.
pub fn expected_autocov(gamma: &[f64], m_lag: usize, t: usize, demeaned: bool) -> Result<Vec<f64>> {
    let need = if demeaned { t - 1 } else { m_lag };
    if gamma.len() <= need {
        return Err(Error::Range(format!(
            "need autocovariances up to lag {need}, got {}",
            gamma.len().saturating_sub(1)
        )));
    }
    let tf = t as f64;
    if !demeaned {
        return Ok((0..=m_lag)
            .map(|j| (1.0 - j as f64 / tf) * gamma[j])
            .collect());
    }
    // prefix[h] = gamma(0) + ... + gamma(h - 1)
    let mut prefix = vec![0.0; t + 1];
    for h in 0..t {
        prefix[h + 1] = prefix[h] + gamma[h];
    }
    // c_t for t = 1..=T (stored 0-based): sum over lags 0..t-1 plus lags 1..T-t.
    let c: Vec<f64> = (1..=t)
        .map(|s| (prefix[s] + prefix[t - s + 1] - gamma[0]) / tf)
        .collect();
    let v = c.iter().sum::<f64>() / tf;
    let mut c_prefix = vec![0.0; t + 1];
    for i in 0..t {
        c_prefix[i + 1] = c_prefix[i] + c[i];
    }
    Ok((0..=m_lag)
        .map(|j| {
            let n = (t - j) as f64;
            let late = c_prefix[t] - c_prefix[j];
            let early = c_prefix[t - j];
            (n * gamma[j] - late - early + n * v) / tf
        })
        .collect())
}

/// The smoothed spectral density `E f_hat` at `lambdas`, given the exact autocovariances.
pub fn smoothed_target(
    gamma: &[f64],
    m_lag: usize,
    t: usize,
    window: Window,
    lambdas: &[f64],
    demeaned: bool,
) -> Result<SpectralEstimate> {
    if m_lag >= t {
        return Err(Error::Range(format!(
            "truncation lag {m_lag} must be smaller than T = {t}"
        )));
    }
    let expected = expected_autocov(gamma, m_lag, t, demeaned)?;
    let lagged: Vec<f64> = window
        .weights(m_lag)
        .iter()
        .zip(&expected)
        .map(|(w, g)| w * g)
        .collect();
    Ok(SpectralEstimate {
        lambdas: lambdas.to_vec(),
        values: cosine_series(&lagged, lambdas),
        series_len: t,
        m_lag,
        window,
    })
}
