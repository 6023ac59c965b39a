//! Time-series container, sample autocovariances and the Fourier-frequency grid.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// An ordered sequence of real observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    centered: bool,
}

impl TimeSeries {
    /// Wraps raw observations. Requires at least two finite values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a series needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "observation {} is not finite ({})",
                i + 1,
                values[i]
            )));
        }
        Ok(Self {
            values,
            centered: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether the sample mean has been subtracted.
    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Multiplies every observation by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            centered: self.centered,
        }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Subtracts the sample mean. Already-centered series are returned unchanged.
pub fn demean(series: &TimeSeries) -> TimeSeries {
    if series.centered {
        return series.clone();
    }
    let mean = series.mean();
    let mut values: Vec<f64> = series.values.iter().map(|v| v - mean).collect();
    // A second pass removes the residual left by cancellation in the first mean.
    let residual = values.iter().sum::<f64>() / values.len() as f64;
    if residual != 0.0 {
        values.iter_mut().for_each(|v| *v -= residual);
    }
    TimeSeries {
        values,
        centered: true,
    }
}

/// Sample autocovariances with divisor `T` for lags `0..=max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSeq {
    gamma: Vec<f64>,
    len: usize,
    centered_estimator: bool,
}

impl AutocovSeq {
    /// Builds a sequence from known values, e.g. exact process autocovariances.
    pub fn from_values(gamma: Vec<f64>, len: usize) -> Self {
        Self {
            gamma,
            len,
            centered_estimator: false,
        }
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn at(&self, lag: usize) -> f64 {
        self.gamma[lag]
    }

    pub fn max_lag(&self) -> usize {
        self.gamma.len() - 1
    }

    /// Length `T` of the series the values were computed from.
    pub fn series_len(&self) -> usize {
        self.len
    }

    /// True when computed from a de-meaned series.
    pub fn centered_estimator(&self) -> bool {
        self.centered_estimator
    }
}

/// `gamma[j] = (1/T) * sum_{t=j+1..T} v_t v_{t-j}` for `j = 0..=max_lag`.
pub fn autocov(series: &TimeSeries, max_lag: usize) -> Result<AutocovSeq> {
    let v = series.values();
    let n = v.len();
    if max_lag >= n {
        return Err(Error::Range(format!(
            "max lag {max_lag} must be smaller than the series length {n}"
        )));
    }
    let scale = 1.0 / n as f64;
    let gamma = (0..=max_lag)
        .map(|j| v[j..].iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * scale)
        .collect();
    Ok(AutocovSeq {
        gamma,
        len: n,
        centered_estimator: series.is_centered(),
    })
}

/// Positive Fourier frequencies `2*pi*k/T` for `k = 1..=floor(T/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierGrid {
    len: usize,
    frequencies: Vec<f64>,
}

impl FourierGrid {
    pub fn series_len(&self) -> usize {
        self.len
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Number of frequencies, `floor(T/2)`.
    pub fn size(&self) -> usize {
        self.frequencies.len()
    }
}

pub fn fourier_grid(len: usize) -> Result<FourierGrid> {
    if len < 2 {
        return Err(Error::Range(format!(
            "the Fourier grid needs T >= 2, got {len}"
        )));
    }
    let frequencies = (1..=len / 2)
        .map(|k| 2.0 * PI * k as f64 / len as f64)
        .collect();
    Ok(FourierGrid { len, frequencies })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_short_and_non_finite() {
        assert!(TimeSeries::new(vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::INFINITY, 2.0]).is_err());
    }

    #[test]
    fn demean_examples() {
        let d = demean(&series(&[1.0, 2.0, 3.0]));
        assert!(d.is_centered());
        assert_eq!(d.values(), &[-1.0, 0.0, 1.0]);

        let again = demean(&d);
        assert_eq!(again.values(), d.values());

        let c = demean(&series(&[4.2, 4.2, 4.2, 4.2]));
        assert!(c.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn demean_mean_is_zero() {
        let d = demean(&series(&[1e6, 1e6 + 1.0, 1e6 + 3.0, 1e6 - 7.5, 1e6 + 0.25]));
        let max = d.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        assert!(d.mean().abs() <= 1e-12 * max);
    }

    #[test]
    fn autocov_examples() {
        let z = autocov(&series(&[0.0; 8]), 5).unwrap();
        assert!(z.gamma().iter().all(|&g| g == 0.0));

        let alt = autocov(&series(&[1.0, -1.0, 1.0, -1.0]), 1).unwrap();
        assert_eq!(alt.at(0), 1.0);
        assert_eq!(alt.at(1), -0.75);
        assert_eq!(alt.series_len(), 4);
    }

    #[test]
    fn autocov_rejects_lag_beyond_length() {
        assert!(matches!(
            autocov(&series(&[1.0, 2.0, 3.0]), 3),
            Err(Error::Range(_))
        ));
        assert!(autocov(&series(&[1.0, 2.0, 3.0]), 2).is_ok());
    }

    #[test]
    fn fourier_grid_examples() {
        let g4 = fourier_grid(4).unwrap();
        assert_eq!(g4.frequencies(), &[PI / 2.0, PI]);

        let g8 = fourier_grid(8).unwrap();
        let expected = [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI];
        for (a, b) in g8.frequencies().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }

        let g256 = fourier_grid(256).unwrap();
        assert_eq!(g256.size(), 128);
        assert_eq!(*g256.frequencies().last().unwrap(), PI);

        let g7 = fourier_grid(7).unwrap();
        assert_eq!(g7.size(), 3);
        assert!(g7.frequencies().windows(2).all(|w| w[0] < w[1]));
        assert!(*g7.frequencies().last().unwrap() < PI);

        assert!(fourier_grid(1).is_err());
    }
}
