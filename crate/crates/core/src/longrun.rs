//! Kernel-weighted long-run covariances of the lagged products `X_t X_{t-j}` and the
//! standardized covariance matrix of the multiplier bootstrap.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{AutocovSeq, TimeSeries};
use crate::spectral::{CoefMatrix, SpectralEstimate};
use crate::window::Window;

/// Default cut-off below which kernel weights are dropped from the double sum.
pub const DEFAULT_TRUNCATION: f64 = 1e-12;

/// Relative floor applied to spectral estimates used as divisors.
pub const DIVISOR_FLOOR: f64 = 1e-8;

/// Shape of the weight function `K`. Both shapes have a nonnegative Fourier transform,
/// which makes the weighted double sum a positive semidefinite quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KernelShape {
    /// `exp(-x^2 / 2)`.
    #[default]
    Gaussian,
    /// The Parzen window used as a kernel; compactly supported on `[-1, 1]`.
    Parzen,
}

impl KernelShape {
    pub fn name(self) -> &'static str {
        match self {
            KernelShape::Gaussian => "gaussian",
            KernelShape::Parzen => "parzen",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            KernelShape::Gaussian => (-0.5 * x * x).exp(),
            KernelShape::Parzen => Window::Parzen.eval(x),
        }
    }
}

impl fmt::Display for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelShape::Gaussian),
            "parzen" => Ok(KernelShape::Parzen),
            _ => Err(Error::Config(format!(
                "unknown covariance kernel '{s}', expected one of: gaussian, parzen"
            ))),
        }
    }
}

/// Kernel `K(x / scale)` evaluated at `(t - s) / bandwidth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovKernel {
    pub shape: KernelShape,
    pub bandwidth: f64,
    pub scale: f64,
    pub truncation: f64,
}

impl CovKernel {
    pub fn new(shape: KernelShape, bandwidth: f64) -> Result<Self> {
        Self::with_scale(shape, bandwidth, 1.0)
    }

    pub fn with_scale(shape: KernelShape, bandwidth: f64, scale: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!(
                "kernel scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self {
            shape,
            bandwidth,
            scale,
            truncation: DEFAULT_TRUNCATION,
        })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelShape::Gaussian, bandwidth)
    }

    pub fn with_truncation(mut self, truncation: f64) -> Self {
        self.truncation = truncation;
        self
    }

    /// `K(x)` including the scale convention.
    pub fn eval(&self, x: f64) -> f64 {
        self.shape.eval(x / self.scale)
    }

    /// Weight attached to a time difference of `lag`.
    pub fn weight(&self, lag: usize) -> f64 {
        self.eval(lag as f64 / self.bandwidth)
    }

    /// Largest lag whose weight is kept.
    pub fn support(&self, series_len: usize) -> usize {
        let reach = match self.shape {
            KernelShape::Gaussian => {
                let tol = self.truncation.clamp(f64::MIN_POSITIVE, 1.0);
                (2.0 * (1.0 / tol).ln()).sqrt()
            }
            KernelShape::Parzen => 1.0,
        };
        let last = (reach * self.scale * self.bandwidth).floor();
        let mut l = if last.is_finite() {
            last as usize
        } else {
            usize::MAX
        };
        l = l.min(series_len.saturating_sub(1));
        while l > 0 && self.weight(l) < self.truncation {
            l -= 1;
        }
        l
    }
}

/// `sigma[j1][j2]` for `0 <= j1, j2 <= M`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRunCov {
    pub matrix: DMatrix<f64>,
    pub kernel: CovKernel,
    pub series_len: usize,
}

impl LongRunCov {
    pub fn m_lag(&self) -> usize {
        self.matrix.nrows() - 1
    }
}

/// Centered lagged products `X_t X_{t-j} - gamma_hat(j)` (zero for `t <= j`), one row per lag.
pub(crate) fn lagged_products(x: &[f64], gamma: &[f64], m_lag: usize) -> Vec<Vec<f64>> {
    (0..=m_lag)
        .map(|j| {
            let mut y = vec![0.0; x.len()];
            for t in j..x.len() {
                y[t] = x[t] * x[t - j] - gamma[j];
            }
            y
        })
        .collect()
}

fn smooth(y: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|t| {
            let mut acc = weights[0] * y[t];
            for (l, &w) in weights.iter().enumerate().skip(1) {
                if t >= l {
                    acc += w * y[t - l];
                }
                if t + l < n {
                    acc += w * y[t + l];
                }
            }
            acc
        })
        .collect()
}

/// Kernel estimator of the long-run covariances of the lagged products.
///
/// Kernel weights beyond [`CovKernel::support`] are dropped, which turns the
/// `O(T^2)` double sum into `O(T * b_T)` per lag.
pub fn sigma_hat(
    series: &TimeSeries,
    acov: &AutocovSeq,
    m_lag: usize,
    kernel: &CovKernel,
) -> Result<LongRunCov> {
    let x = series.values();
    let t = x.len();
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
    if !(kernel.bandwidth > 0.0) {
        return Err(Error::Config(format!(
            "bandwidth must be positive, got {}",
            kernel.bandwidth
        )));
    }
    let reach = kernel.support(t);
    let weights: Vec<f64> = (0..=reach).map(|l| kernel.weight(l)).collect();
    let products = lagged_products(x, acov.gamma(), m_lag);
    let smoothed: Vec<Vec<f64>> = products.par_iter().map(|y| smooth(y, &weights)).collect();

    let scale = 1.0 / t as f64;
    let rows: Vec<Vec<f64>> = (0..=m_lag)
        .into_par_iter()
        .map(|j1| {
            (j1..=m_lag)
                .map(|j2| {
                    products[j1]
                        .iter()
                        .zip(&smoothed[j2])
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        * scale
                })
                .collect()
        })
        .collect();
    let mut matrix = DMatrix::zeros(m_lag + 1, m_lag + 1);
    for (j1, row) in rows.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j2 = j1 + offset;
            matrix[(j1, j2)] = v;
            matrix[(j2, j1)] = v;
        }
    }
    Ok(LongRunCov {
        matrix,
        kernel: *kernel,
        series_len: t,
    })
}

/// Standardized covariance matrix of the approximating Gaussian vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierCov {
    pub matrix: DMatrix<f64>,
    /// Divisor floor applied to the spectral estimate.
    pub floor: f64,
    /// Frequencies (0-based) whose estimate was raised to the floor.
    pub clamped: Vec<usize>,
}

impl MultiplierCov {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_diagonal(&self) -> f64 {
        self.matrix.diagonal().iter().copied().fold(0.0, f64::max)
    }
}

/// `A Sigma A^T` for a coefficient matrix `A` and lag covariance `Sigma`.
pub fn unstandardized_cov(coefs: &CoefMatrix, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let a = &coefs.matrix;
    let left = a * sigma;
    let mut c = &left * a.transpose();
    symmetrize(&mut c);
    c
}

pub(crate) fn symmetrize(c: &mut DMatrix<f64>) {
    let n = c.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
}

/// Assembles `D (A Sigma A^T) D` with `D = diag(1 / max(f_hat, floor))`.
pub fn multiplier_cov(
    est: &SpectralEstimate,
    coefs: &CoefMatrix,
    lrc: &LongRunCov,
) -> Result<MultiplierCov> {
    if est.len() != coefs.rows() {
        return Err(Error::InvalidInput(format!(
            "estimate has {} frequencies but the coefficient matrix has {} rows",
            est.len(),
            coefs.rows()
        )));
    }
    if coefs.m_lag != lrc.m_lag() {
        return Err(Error::InvalidInput(format!(
            "coefficient matrix uses M = {} but the long-run covariance uses M = {}",
            coefs.m_lag,
            lrc.m_lag()
        )));
    }
    let peak = est.max();
    let floor = if peak > 0.0 {
        DIVISOR_FLOOR * peak
    } else {
        1.0
    };
    let clamped: Vec<usize> = est
        .values
        .iter()
        .enumerate()
        .filter(|(_, &f)| f < floor)
        .map(|(k, _)| k)
        .collect();
    if !clamped.is_empty() && peak > 0.0 {
        warn!(
            "{} spectral estimate(s) below {floor:.3e}; divisor clamped",
            clamped.len()
        );
    }
    let inv: Vec<f64> = est.values.iter().map(|&f| 1.0 / f.max(floor)).collect();
    let mut matrix = unstandardized_cov(coefs, &lrc.matrix);
    let n = matrix.nrows();
    for i in 0..n {
        for j in 0..n {
            matrix[(i, j)] *= inv[i] * inv[j];
        }
    }
    Ok(MultiplierCov {
        matrix,
        floor,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{autocov, fourier_grid};
    use crate::spectral::{coefficients, lag_window_estimate};

    fn brute_sigma(x: &[f64], gamma: &[f64], j1: usize, j2: usize, k: &CovKernel) -> f64 {
        let t = x.len();
        let mut total = 0.0;
        for a in (j1 + 1)..=t {
            for b in (j2 + 1)..=t {
                let w = k.eval((a as f64 - b as f64) / k.bandwidth);
                total += w
                    * (x[a - 1] * x[a - 1 - j1] - gamma[j1])
                    * (x[b - 1] * x[b - 1 - j2] - gamma[j2]);
            }
        }
        total / t as f64
    }

    fn pseudo_series(n: usize) -> TimeSeries {
        let mut state = 0.3f64;
        let v = (0..n)
            .map(|i| {
                state = 0.7 * state + ((i as f64 * 1.37).sin() * 43758.5453).fract() - 0.25;
                state
            })
            .collect();
        TimeSeries::new(v).unwrap()
    }

    #[test]
    fn kernel_shapes() {
        for shape in [KernelShape::Gaussian, KernelShape::Parzen] {
            assert_eq!(shape.eval(0.0), 1.0);
            let mut prev = 1.0;
            for i in 1..400 {
                let x = i as f64 * 0.01;
                let v = shape.eval(x);
                assert!(v <= prev && v >= 0.0);
                assert_eq!(v, shape.eval(-x));
                prev = v;
            }
            assert_eq!(shape.name().parse::<KernelShape>().unwrap(), shape);
        }
        assert!("epanechnikov".parse::<KernelShape>().is_err());
    }

    #[test]
    fn rejects_non_positive_bandwidth() {
        assert!(matches!(CovKernel::gaussian(0.0), Err(Error::Config(_))));
        assert!(CovKernel::gaussian(-1.0).is_err());
        assert!(CovKernel::with_scale(KernelShape::Gaussian, 1.0, 0.0).is_err());
    }

    #[test]
    fn support_drops_only_tiny_weights() {
        let k = CovKernel::gaussian(2.0).unwrap();
        let l = k.support(1000);
        assert!(k.weight(l) >= 1e-12);
        assert!(k.weight(l + 1) < 1e-12);
        assert_eq!(CovKernel::gaussian(1e-3).unwrap().support(100), 0);
        assert_eq!(CovKernel::gaussian(50.0).unwrap().support(20), 19);
    }

    #[test]
    fn zero_series_gives_zero_matrix() {
        let s = TimeSeries::new(vec![0.0; 40]).unwrap();
        let acov = autocov(&s, 4).unwrap();
        let lrc = sigma_hat(&s, &acov, 4, &CovKernel::gaussian(3.0).unwrap()).unwrap();
        assert!(lrc.matrix.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn narrow_kernel_reduces_to_diagonal_sum() {
        let s = pseudo_series(50);
        let acov = autocov(&s, 3).unwrap();
        let lrc = sigma_hat(&s, &acov, 3, &CovKernel::gaussian(1e-3).unwrap()).unwrap();
        let x = s.values();
        for j in 0..=3 {
            let direct: f64 = (j..x.len())
                .map(|t| (x[t] * x[t - j] - acov.at(j)).powi(2))
                .sum::<f64>()
                / x.len() as f64;
            assert!((lrc.matrix[(j, j)] - direct).abs() < 1e-12 * direct.max(1.0));
            assert!(lrc.matrix[(j, j)] >= 0.0);
        }
    }

    #[test]
    fn banded_matches_full_double_sum() {
        for (n, b) in [(17usize, 0.7), (64, 3.0), (128, 8.0)] {
            let s = pseudo_series(n);
            let m = 5;
            let acov = autocov(&s, m).unwrap();
            let k = CovKernel::gaussian(b).unwrap();
            let lrc = sigma_hat(&s, &acov, m, &k).unwrap();
            let norm = lrc.matrix.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for j1 in 0..=m {
                for j2 in 0..=m {
                    let brute = brute_sigma(s.values(), acov.gamma(), j1, j2, &k);
                    assert!(
                        (lrc.matrix[(j1, j2)] - brute).abs() <= 1e-10 * norm,
                        "T={n} b={b} ({j1},{j2})"
                    );
                }
            }
            assert_eq!(lrc.matrix, lrc.matrix.transpose());
        }
    }

    #[test]
    fn parzen_kernel_matches_full_double_sum() {
        let s = pseudo_series(60);
        let acov = autocov(&s, 4).unwrap();
        let k = CovKernel::new(KernelShape::Parzen, 4.5).unwrap();
        let lrc = sigma_hat(&s, &acov, 4, &k).unwrap();
        for j1 in 0..=4 {
            for j2 in 0..=4 {
                let brute = brute_sigma(s.values(), acov.gamma(), j1, j2, &k);
                assert!((lrc.matrix[(j1, j2)] - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multiplier_cov_reductions() {
        let grid = fourier_grid(32).unwrap();
        let m = 4;
        let coefs = coefficients(m, Window::Parzen, grid.frequencies()).unwrap();
        let s = pseudo_series(32);
        let acov = autocov(&s, m).unwrap();
        let est = lag_window_estimate(&acov, m, Window::Parzen, &grid).unwrap();
        let kernel = CovKernel::gaussian(1.0).unwrap();

        let zero = LongRunCov {
            matrix: DMatrix::zeros(m + 1, m + 1),
            kernel,
            series_len: 32,
        };
        let c = multiplier_cov(&est, &coefs, &zero).unwrap();
        assert!(c.matrix.iter().all(|&v| v == 0.0));

        let ident = LongRunCov {
            matrix: DMatrix::identity(m + 1, m + 1),
            kernel,
            series_len: 32,
        };
        let c = multiplier_cov(&est, &coefs, &ident).unwrap();
        for k in 0..grid.size() {
            let energy = coefs.matrix.row(k).norm_squared();
            let expected = energy / est.values[k].powi(2);
            assert!((c.matrix[(k, k)] - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn multiplier_cov_checks_dimensions() {
        let grid = fourier_grid(32).unwrap();
        let coefs = coefficients(4, Window::Parzen, grid.frequencies()).unwrap();
        let s = pseudo_series(32);
        let acov = autocov(&s, 5).unwrap();
        let est = lag_window_estimate(&acov, 4, Window::Parzen, &grid).unwrap();
        let lrc = sigma_hat(&s, &acov, 5, &CovKernel::gaussian(1.0).unwrap()).unwrap();
        assert!(multiplier_cov(&est, &coefs, &lrc).is_err());
    }

    #[test]
    fn clamps_non_positive_divisors() {
        let grid = fourier_grid(16).unwrap();
        let m = 3;
        let coefs = coefficients(m, Window::Parzen, grid.frequencies()).unwrap();
        let mut values = vec![1.0; grid.size()];
        values[2] = -0.5;
        values[5] = 0.0;
        let est = SpectralEstimate {
            lambdas: grid.frequencies().to_vec(),
            values,
            series_len: 16,
            m_lag: m,
            window: Window::Parzen,
        };
        let lrc = LongRunCov {
            matrix: DMatrix::identity(m + 1, m + 1),
            kernel: CovKernel::gaussian(1.0).unwrap(),
            series_len: 16,
        };
        let c = multiplier_cov(&est, &coefs, &lrc).unwrap();
        assert_eq!(c.clamped, vec![2, 5]);
        assert!(c
            .matrix
            .diagonal()
            .iter()
            .all(|&d| d > 0.0 && d.is_finite()));
    }
}
