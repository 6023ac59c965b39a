//! Exact second- and fourth-order quantities for Gaussian linear processes.
//!
//! For a Gaussian process the fourth moments factor into products of autocovariances,
//! which makes the long-run covariance of the lagged products, and with it the covariance
//! of the approximating Gaussian vector, exactly computable. These values are the
//! reference against which the estimators are checked.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::longrun::{symmetrize, unstandardized_cov};
use crate::series::fourier_grid;
use crate::spectral::coefficients;
use crate::window::Window;

/// ARMA process `X_t = sum phi_k X_{t-k} + e_t + sum theta_k e_{t-k}`, `Var(e_t) = sigma2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProcessSpec {
    ar: Vec<f64>,
    ma: Vec<f64>,
    sigma2: f64,
    gaussian: bool,
}

impl LinearProcessSpec {
    pub fn new(ar: Vec<f64>, ma: Vec<f64>, sigma2: f64, gaussian: bool) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "innovation variance must be positive, got {sigma2}"
            )));
        }
        if ar.iter().chain(&ma).any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite ARMA coefficient".into()));
        }
        if !ar_is_stationary(&ar) {
            return Err(Error::Stationarity(format!(
                "AR polynomial with coefficients {ar:?} has a root on or inside the unit circle"
            )));
        }
        Ok(Self {
            ar,
            ma,
            sigma2,
            gaussian,
        })
    }

    /// Gaussian AR(1) with unit innovation variance.
    pub fn ar1(phi: f64) -> Result<Self> {
        Self::new(vec![phi], Vec::new(), 1.0, true)
    }

    pub fn white_noise(sigma2: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), sigma2, true)
    }

    pub fn ar(&self) -> &[f64] {
        &self.ar
    }

    pub fn ma(&self) -> &[f64] {
        &self.ma
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn is_gaussian(&self) -> bool {
        self.gaussian
    }

    fn require_gaussian(&self) -> Result<()> {
        if self.gaussian {
            Ok(())
        } else {
            Err(Error::UnsupportedOracle(
                "fourth-moment oracle requires Gaussian innovations".into(),
            ))
        }
    }

    /// MA(infinity) weights, truncated once they are negligible.
    fn psi_weights(&self) -> Vec<f64> {
        let p = self.ar.len();
        let q = self.ma.len();
        let mut psi = vec![1.0];
        let mut peak = 1.0f64;
        let mut quiet = 0;
        let mut i = 1;
        while i < 200_000 {
            let mut v = if i <= q { self.ma[i - 1] } else { 0.0 };
            for k in 1..=p.min(i) {
                v += self.ar[k - 1] * psi[i - k];
            }
            peak = peak.max(v.abs());
            psi.push(v);
            if i > p + q && v.abs() < 1e-18 * peak {
                quiet += 1;
                if quiet > p.max(1) {
                    break;
                }
            } else {
                quiet = 0;
            }
            i += 1;
        }
        psi
    }

    /// Autocovariances `gamma(0..=max_lag)`.
    pub fn autocov(&self, max_lag: usize) -> Vec<f64> {
        if self.ar.len() == 1 && self.ma.is_empty() {
            return (0..=max_lag)
                .map(|j| ar1_autocov_unchecked(self.ar[0], self.sigma2, j))
                .collect();
        }
        let psi = self.psi_weights();
        (0..=max_lag)
            .map(|h| {
                if h >= psi.len() {
                    0.0
                } else {
                    self.sigma2 * psi.iter().zip(&psi[h..]).map(|(a, b)| a * b).sum::<f64>()
                }
            })
            .collect()
    }

    /// Spectral density `(sigma2 / 2pi) |theta(e^{-i lambda})|^2 / |phi(e^{-i lambda})|^2`.
    pub fn spectral_density(&self, lambda: f64) -> f64 {
        let poly = |coefs: &[f64], sign: f64| {
            let (mut re, mut im) = (1.0, 0.0);
            for (k, c) in coefs.iter().enumerate() {
                let angle = (k + 1) as f64 * lambda;
                re += sign * c * angle.cos();
                im -= sign * c * angle.sin();
            }
            re * re + im * im
        };
        self.sigma2 / (2.0 * PI) * poly(&self.ma, 1.0) / poly(&self.ar, -1.0)
    }
}

/// Step-down recursion: stationary iff every partial autocorrelation is inside (-1, 1).
fn ar_is_stationary(ar: &[f64]) -> bool {
    let mut a = ar.to_vec();
    for k in (1..=a.len()).rev() {
        let kappa = a[k - 1];
        if !(kappa.abs() < 1.0) {
            return false;
        }
        let denom = 1.0 - kappa * kappa;
        let prev: Vec<f64> = (1..k)
            .map(|i| (a[i - 1] + kappa * a[k - i - 1]) / denom)
            .collect();
        a = prev;
    }
    true
}

fn ar1_autocov_unchecked(phi: f64, sigma2: f64, lag: usize) -> f64 {
    sigma2 * phi.powi(lag as i32) / (1.0 - phi * phi)
}

/// `sigma2 * phi^|j| / (1 - phi^2)`.
pub fn ar1_autocov(phi: f64, sigma2: f64, lag: i64) -> Result<f64> {
    if !(phi.abs() < 1.0) {
        return Err(Error::Stationarity(format!("|phi| must be < 1, got {phi}")));
    }
    Ok(ar1_autocov_unchecked(
        phi,
        sigma2,
        lag.unsigned_abs() as usize,
    ))
}

pub fn ar_spectral_density(spec: &LinearProcessSpec, lambda: f64) -> f64 {
    spec.spectral_density(lambda)
}

fn gamma_at(gamma: &[f64], h: i64) -> f64 {
    gamma[h.unsigned_abs() as usize]
}

/// Fourth-moment covariance of the lagged products at time difference `lag = t - s`:
/// `gamma(l) gamma(l - j1 + j2) + gamma(l + j2) gamma(l - j1)`.
pub fn isserlis_term(gamma: &[f64], lag: i64, j1: usize, j2: usize) -> f64 {
    let (j1, j2) = (j1 as i64, j2 as i64);
    gamma_at(gamma, lag) * gamma_at(gamma, lag - j1 + j2)
        + gamma_at(gamma, lag + j2) * gamma_at(gamma, lag - j1)
}

/// Exact `sigma_T(j1, j2)` for a Gaussian process with autocovariances `gamma`.
///
/// The double sum over `(t, s)` is collapsed to a sum over `l = t - s` weighted by the
/// number of admissible pairs. `gamma` must cover lags `0..T`.
pub fn isserlis_sigma(gamma: &[f64], t: usize, j1: usize, j2: usize) -> Result<f64> {
    if j1 >= t || j2 >= t {
        return Err(Error::Range(format!(
            "lags ({j1}, {j2}) must be below T = {t}"
        )));
    }
    if gamma.len() < t {
        return Err(Error::Range(format!(
            "need autocovariances up to lag {}, got {}",
            t - 1,
            gamma.len().saturating_sub(1)
        )));
    }
    let (ti, a, b) = (t as i64, j1 as i64, j2 as i64);
    let total: f64 = (-(ti - 1 - a)..=(ti - 1 - b))
        .map(|l| {
            let lo = (b + 1).max(a + 1 - l);
            let hi = ti.min(ti - l);
            let count = (hi - lo + 1).max(0);
            count as f64 * isserlis_term(gamma, l, j1, j2)
        })
        .sum();
    Ok(total / t as f64)
}

/// `sigma_T(j1, j2)` for `0 <= j1, j2 <= m_lag`.
pub fn isserlis_sigma_matrix(gamma: &[f64], t: usize, m_lag: usize) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = (0..=m_lag)
        .into_par_iter()
        .map(|j1| {
            (0..=m_lag)
                .map(|j2| isserlis_sigma(gamma, t, j1, j2))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut m = DMatrix::from_fn(m_lag + 1, m_lag + 1, |i, j| rows[i][j]);
    symmetrize(&mut m);
    Ok(m)
}

/// Exact covariance structure of the approximating Gaussian vector on the Fourier grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCov {
    pub lambdas: Vec<f64>,
    /// True spectral density at each frequency.
    pub density: Vec<f64>,
    /// `sigma_T(j1, j2)`.
    pub sigma: DMatrix<f64>,
    /// `A Sigma A^T`: covariance of `sqrt(T/M) (f_hat - E f_hat)` across frequencies.
    pub unstandardized: DMatrix<f64>,
    /// Covariance after dividing by `f(lambda_k1) f(lambda_k2)`.
    pub standardized: DMatrix<f64>,
}

impl OracleCov {
    /// Variance of `sqrt(T/M) (f_hat - E f_hat)` at each frequency.
    pub fn z_variance(&self) -> Vec<f64> {
        self.unstandardized.diagonal().iter().copied().collect()
    }
}

pub fn true_multiplier_cov(
    spec: &LinearProcessSpec,
    t: usize,
    m_lag: usize,
    window: Window,
) -> Result<OracleCov> {
    spec.require_gaussian()?;
    if m_lag >= t {
        return Err(Error::Range(format!(
            "truncation lag {m_lag} must be smaller than T = {t}"
        )));
    }
    let grid = fourier_grid(t)?;
    let gamma = spec.autocov(t);
    let sigma = isserlis_sigma_matrix(&gamma, t, m_lag)?;
    let coefs = coefficients(m_lag, window, grid.frequencies())?;
    let unstandardized = unstandardized_cov(&coefs, &sigma);
    let density: Vec<f64> = grid
        .frequencies()
        .iter()
        .map(|&l| spec.spectral_density(l))
        .collect();
    let n = density.len();
    let standardized = DMatrix::from_fn(n, n, |i, j| {
        unstandardized[(i, j)] / (density[i] * density[j])
    });
    Ok(OracleCov {
        lambdas: grid.frequencies().to_vec(),
        density,
        sigma,
        unstandardized,
        standardized,
    })
}

/// Large-`M` approximation `f^2(lambda) (1/M) sum_{|j|<=M} w^2(j/M) (1 + cos(2 j lambda))`
/// of the variance of `sqrt(T/M) (f_hat - E f_hat)`.
pub fn variance_approximation(density: f64, lambda: f64, m_lag: usize, window: Window) -> f64 {
    let m = m_lag as f64;
    let total: f64 = (-(m_lag as i64)..=m_lag as i64)
        .map(|j| {
            let w = window.eval(j as f64 / m);
            w * w * (1.0 + (2.0 * j as f64 * lambda).cos())
        })
        .sum();
    density * density * total / m
}

/// `sup_k |Var_k - approximation_k|` over the Fourier grid.
pub fn variance_approximation_error(oracle: &OracleCov, m_lag: usize, window: Window) -> f64 {
    oracle
        .z_variance()
        .iter()
        .zip(oracle.lambdas.iter().zip(&oracle.density))
        .map(|(&v, (&l, &f))| (v - variance_approximation(f, l, m_lag, window)).abs())
        .fold(0.0, f64::max)
}
