//! Oracle property suite: estimator outputs compared against exact or brute-force values.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::band::{bootstrap_maxima, psd_factor, DEFAULT_EIG_CLIP_TOL};
use crate::error::Result;
use crate::longrun::{sigma_hat, CovKernel};
use crate::oracle::{
    isserlis_sigma, isserlis_sigma_matrix, variance_approximation, LinearProcessSpec,
};
use crate::rng::{derive_seed, Stream};
use crate::series::{autocov, fourier_grid, TimeSeries};
use crate::sim::{simulate, Model, ModelSpec};
use crate::spectral::{coefficients, lag_window_estimate, smoothed_target};
use crate::window::{window_l2, Window};

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {}: {}", self.name, self.detail)
    }
}

/// Monte-Carlo sizes for the randomized checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub isserlis_mc_reps: usize,
    pub gauss_sims: usize,
    pub gauss_draws: usize,
    pub trend_reps: usize,
}

impl Scale {
    pub const FULL: Scale = Scale {
        isserlis_mc_reps: 100_000,
        gauss_sims: 5_000,
        gauss_draws: 100_000,
        trend_reps: 30,
    };

    pub const QUICK: Scale = Scale {
        isserlis_mc_reps: 10_000,
        gauss_sims: 1_000,
        gauss_draws: 20_000,
        trend_reps: 30,
    };
}

/// `ceil(T^p)` with a guard against `4.000000001`-style rounding.
pub fn power_rate(t: usize, p: f64) -> usize {
    ((t as f64).powf(p) - 1e-9).ceil() as usize
}

fn model_i() -> LinearProcessSpec {
    LinearProcessSpec::ar1(0.8).expect("0.8 is stationary")
}

fn series(model: Model, seed: u64, t: usize) -> Result<TimeSeries> {
    simulate(&ModelSpec::new(model, seed), t)
}

pub fn parzen_l2() -> Check {
    let v = window_l2(Window::Parzen);
    let err = (v - 151.0 / 280.0).abs();
    Check::new(
        "parzen W2",
        err <= 1e-10,
        format!("integral = {v:.15}, |diff from 151/280| = {err:.2e}"),
    )
}

/// Plain double sum over `(t, s)`, no banding.
pub fn sigma_hat_double_sum(x: &[f64], gamma: &[f64], kernel: &CovKernel) -> DMatrix<f64> {
    let t_len = x.len();
    let m = gamma.len() - 1;
    DMatrix::from_fn(m + 1, m + 1, |j1, j2| {
        let mut acc = 0.0;
        for t in j1..t_len {
            let y1 = x[t] * x[t - j1] - gamma[j1];
            for s in j2..t_len {
                let y2 = x[s] * x[s - j2] - gamma[j2];
                acc += kernel.eval((t as f64 - s as f64) / kernel.bandwidth) * y1 * y2;
            }
        }
        acc / t_len as f64
    })
}

pub fn banded_sigma_matches_double_sum() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (i, &(t, m, b)) in [(16, 3, 1.0), (64, 6, 4.0), (128, 10, 8.0), (128, 4, 2.5)]
        .iter()
        .enumerate()
    {
        let x = series(Model::I, 100 + i as u64, t)?;
        let acov = autocov(&x, m)?;
        let kernel = CovKernel::gaussian(b)?;
        let fast = sigma_hat(&x, &acov, m, &kernel)?.matrix;
        let slow = sigma_hat_double_sum(x.values(), acov.gamma(), &kernel);
        let scale = slow.amax().max(f64::MIN_POSITIVE);
        worst = worst.max((fast - slow).amax() / scale);
    }
    Ok(Check::new(
        "banded sigma_hat vs double sum",
        worst <= 1e-10,
        format!("max relative deviation = {worst:.2e} (tol 1e-10)"),
    ))
}

/// `(1/T) sum_{t,s} E[Y_{t,j1} Y_{s,j2}]` by explicit double sum over `(t, s)`.
pub fn isserlis_double_sum(gamma: &[f64], t_len: usize, j1: usize, j2: usize) -> f64 {
    let g = |k: i64| gamma[k.unsigned_abs() as usize];
    let mut acc = 0.0;
    for t in (j1 + 1)..=t_len {
        for s in (j2 + 1)..=t_len {
            let (t, s) = (t as i64, s as i64);
            let (j1, j2) = (j1 as i64, j2 as i64);
            acc += g(t - s) * g(t - j1 - s + j2) + g(t - s + j2) * g(t - j1 - s);
        }
    }
    acc / t_len as f64
}

pub fn isserlis_matches_double_sum() -> Result<Check> {
    let spec = model_i();
    let mut worst: f64 = 0.0;
    for t in [5usize, 17, 64] {
        let gamma = spec.autocov(t);
        let m = (t - 1).min(8);
        for j1 in 0..=m {
            for j2 in 0..=m {
                let fast = isserlis_sigma(&gamma, t, j1, j2)?;
                let slow = isserlis_double_sum(&gamma, t, j1, j2);
                worst = worst.max((fast - slow).abs() / slow.abs().max(1.0));
            }
        }
    }
    Ok(Check::new(
        "isserlis sigma vs double sum",
        worst <= 1e-12,
        format!("max relative deviation = {worst:.2e} (tol 1e-12)"),
    ))
}

/// Monte-Carlo estimate of `(1/T) E[S_{j1} S_{j2}]` with `S_j = sum_t (X_t X_{t-j} - gamma(j))`,
/// returned as `(mean, standard error)` per pair in `pairs`.
pub fn lagged_sum_moments(
    gamma: &[f64],
    t_len: usize,
    pairs: &[(usize, usize)],
    reps: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let max_j = pairs.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0);
    let per_rep: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let x = series(Model::I, derive_seed(seed, Stream::Oracle, i as u64), t_len)?;
            let x = x.values();
            let sums: Vec<f64> = (0..=max_j)
                .map(|j| (j..t_len).map(|t| x[t] * x[t - j] - gamma[j]).sum())
                .collect();
            Ok(pairs
                .iter()
                .map(|&(a, b)| sums[a] * sums[b] / t_len as f64)
                .collect())
        })
        .collect::<Result<_>>()?;
    let r = reps as f64;
    Ok((0..pairs.len())
        .map(|p| {
            let mean = per_rep.iter().map(|v| v[p]).sum::<f64>() / r;
            let var = per_rep.iter().map(|v| (v[p] - mean).powi(2)).sum::<f64>() / (r - 1.0);
            (mean, (var / r).sqrt())
        })
        .collect())
}

pub fn isserlis_matches_monte_carlo(reps: usize, seed: u64) -> Result<Check> {
    let t = 512;
    let gamma = model_i().autocov(t);
    let pairs = [(0, 0), (0, 1), (1, 0), (1, 1)];
    let mc = lagged_sum_moments(&gamma, t, &pairs, reps, seed)?;
    let mut worst_z: f64 = 0.0;
    let mut parts = Vec::new();
    for (&(a, b), &(mean, se)) in pairs.iter().zip(&mc) {
        let exact = isserlis_sigma(&gamma, t, a, b)?;
        let z = (mean - exact).abs() / se;
        worst_z = worst_z.max(z);
        parts.push(format!("({a},{b}) exact {exact:.3} mc {mean:.3}"));
    }
    Ok(Check::new(
        "isserlis sigma vs Monte Carlo",
        worst_z <= 3.0,
        format!(
            "{}; max |z| = {worst_z:.2} (tol 3, {reps} reps)",
            parts.join(", ")
        ),
    ))
}

/// `sup_k |Var_k - approximation_k|` for a Gaussian linear process, using only diagonal
/// entries of the exact covariance.
pub fn variance_deviation(
    spec: &LinearProcessSpec,
    t: usize,
    m: usize,
    window: Window,
) -> Result<f64> {
    let gamma = spec.autocov(t);
    let sigma = isserlis_sigma_matrix(&gamma, t, m)?;
    let grid = fourier_grid(t)?;
    let coefs = coefficients(m, window, grid.frequencies())?;
    let n = grid.size();
    Ok((0..n)
        .into_par_iter()
        .map(|k| {
            let a = coefs.matrix.row(k).transpose();
            let var = (a.transpose() * &sigma * &a)[(0, 0)];
            let lambda = grid.frequencies()[k];
            let approx = variance_approximation(spec.spectral_density(lambda), lambda, m, window);
            (var - approx).abs()
        })
        .reduce(|| 0.0, f64::max))
}

pub fn variance_approximation_trend() -> Result<Check> {
    let spec = model_i();
    let mut devs = Vec::new();
    for t in [512, 2048, 8192] {
        devs.push((
            t,
            power_rate(t, 0.2),
            variance_deviation(&spec, t, power_rate(t, 0.2), Window::Parzen)?,
        ));
    }
    let decreasing = devs.windows(2).all(|w| w[1].2 < w[0].2);
    let detail = devs
        .iter()
        .map(|(t, m, d)| format!("T={t} M={m}: {d:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Check::new(
        "variance approximation trend",
        decreasing,
        detail,
    ))
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Simulated `max_k sqrt(T/M) |f_hat - E f_hat|` for Gaussian AR(1) with phi = 0.8.
pub fn max_deviation_sample(t: usize, m: usize, sims: usize, seed: u64) -> Result<Vec<f64>> {
    let spec = model_i();
    let grid = fourier_grid(t)?;
    let target = smoothed_target(
        &spec.autocov(t),
        m,
        t,
        Window::Parzen,
        grid.frequencies(),
        false,
    )?;
    let rate = (t as f64 / m as f64).sqrt();
    (0..sims)
        .into_par_iter()
        .map(|i| {
            let x = series(Model::I, derive_seed(seed, Stream::Oracle, i as u64), t)?;
            let est = lag_window_estimate(&autocov(&x, m)?, m, Window::Parzen, &grid)?;
            Ok(est
                .values
                .iter()
                .zip(&target.values)
                .map(|(f, g)| rate * (f - g).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

/// Draws of `max_k |xi_k|`, `xi ~ N(0, A sigma A')` with the exact `sigma`.
pub fn gaussian_max_sample(t: usize, m: usize, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let spec = model_i();
    let gamma = spec.autocov(t);
    let sigma = isserlis_sigma_matrix(&gamma, t, m)?;
    let grid = fourier_grid(t)?;
    let a = coefficients(m, Window::Parzen, grid.frequencies())?.matrix;
    let cov = &a * sigma * a.transpose();
    let factor = psd_factor(&cov, DEFAULT_EIG_CLIP_TOL)?;
    Ok(bootstrap_maxima(
        &factor,
        draws,
        derive_seed(seed, Stream::Oracle, u64::MAX),
    ))
}

pub fn gaussian_approximation(sims: usize, draws: usize, seed: u64) -> Result<Check> {
    let (t, m) = (512, 14);
    let stat = max_deviation_sample(t, m, sims, seed)?;
    let gauss = gaussian_max_sample(t, m, draws, seed)?;
    let d = ks_distance(&stat, &gauss);
    Ok(Check::new(
        "gaussian approximation",
        d <= 0.10,
        format!("KS distance = {d:.4} (tol 0.10; T={t}, M={m}, {sims} sims, {draws} draws)"),
    ))
}

/// Median over `reps` series of `sup_{1<=j1,j2<=M} |sigma_hat - sigma_T|`.
pub fn sigma_hat_median_error(t: usize, reps: usize, seed: u64) -> Result<f64> {
    let m = power_rate(t, 0.2);
    let b = (t as f64).powf(0.3);
    let gamma = model_i().autocov(t);
    let exact = isserlis_sigma_matrix(&gamma, t, m)?;
    let kernel = CovKernel::gaussian(b)?;
    let mut errs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let x = series(
                Model::I,
                derive_seed(seed, Stream::Oracle, (t * 1_000_000 + i) as u64),
                t,
            )?;
            let est = sigma_hat(&x, &autocov(&x, m)?, m, &kernel)?.matrix;
            let mut sup: f64 = 0.0;
            for j1 in 1..=m {
                for j2 in 1..=m {
                    sup = sup.max((est[(j1, j2)] - exact[(j1, j2)]).abs());
                }
            }
            Ok(sup)
        })
        .collect::<Result<_>>()?;
    errs.sort_by(f64::total_cmp);
    let n = errs.len();
    Ok(if n % 2 == 1 {
        errs[n / 2]
    } else {
        0.5 * (errs[n / 2 - 1] + errs[n / 2])
    })
}

pub fn sigma_hat_consistency_trend(reps: usize, seed: u64) -> Result<Check> {
    let mut meds = Vec::new();
    for t in [256, 1024, 4096] {
        meds.push((t, sigma_hat_median_error(t, reps, seed)?));
    }
    let decreasing = meds.windows(2).all(|w| w[1].1 < w[0].1);
    let detail = meds
        .iter()
        .map(|(t, e)| format!("T={t}: {e:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Check::new(
        "sigma_hat consistency trend",
        decreasing,
        format!("median sup error {detail} ({reps} reps, b = T^0.3)"),
    ))
}

/// Runs every check. Errors inside a check are reported as failures.
pub fn run_all(scale: Scale, seed: u64) -> Vec<Check> {
    let wrap = |name: &'static str, r: Result<Check>| {
        r.unwrap_or_else(|e| Check::new(name, false, format!("error: {e}")))
    };
    vec![
        parzen_l2(),
        wrap(
            "banded sigma_hat vs double sum",
            banded_sigma_matches_double_sum(),
        ),
        wrap(
            "isserlis sigma vs double sum",
            isserlis_matches_double_sum(),
        ),
        wrap(
            "isserlis sigma vs Monte Carlo",
            isserlis_matches_monte_carlo(scale.isserlis_mc_reps, seed),
        ),
        wrap(
            "variance approximation trend",
            variance_approximation_trend(),
        ),
        wrap(
            "gaussian approximation",
            gaussian_approximation(scale.gauss_sims, scale.gauss_draws, seed),
        ),
        wrap(
            "sigma_hat consistency trend",
            sigma_hat_consistency_trend(scale.trend_reps, seed),
        ),
    ]
}
