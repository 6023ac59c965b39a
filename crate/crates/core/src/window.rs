//! Lag windows `w: [-1, 1] -> R` used to weight sample autocovariances.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// The shipped lag windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Window {
    /// Piecewise cubic: `1 - 6u^2 + 6|u|^3` on `|u| <= 1/2`, `2(1-|u|)^3` beyond.
    #[default]
    Parzen,
    /// Triangle `1 - |u|`.
    Bartlett,
    /// Raised cosine `(1 + cos(pi u)) / 2`.
    TukeyHanning,
    /// Trapezoid equal to 1 on `|u| <= 1/2`, falling linearly to 0 at `|u| = 1`.
    FlatTopTrapezoid,
    /// Constant 1. Not differentiable at the edges; kept for testing.
    Rectangular,
}

impl Window {
    pub const ALL: [Window; 5] = [
        Window::Parzen,
        Window::Bartlett,
        Window::TukeyHanning,
        Window::FlatTopTrapezoid,
        Window::Rectangular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Window::Parzen => "parzen",
            Window::Bartlett => "bartlett",
            Window::TukeyHanning => "tukey-hanning",
            Window::FlatTopTrapezoid => "flat-top-trapezoid",
            Window::Rectangular => "rectangular",
        }
    }

    /// Window value at `u`; zero outside `[-1, 1]`.
    pub fn eval(self, u: f64) -> f64 {
        let a = u.abs();
        if a > 1.0 {
            return 0.0;
        }
        match self {
            Window::Parzen => {
                if a <= 0.5 {
                    1.0 - 6.0 * a * a + 6.0 * a * a * a
                } else {
                    let r = 1.0 - a;
                    2.0 * r * r * r
                }
            }
            Window::Bartlett => 1.0 - a,
            Window::TukeyHanning => 0.5 * (1.0 + (std::f64::consts::PI * a).cos()),
            Window::FlatTopTrapezoid => {
                if a <= 0.5 {
                    1.0
                } else {
                    2.0 * (1.0 - a)
                }
            }
            Window::Rectangular => 1.0,
        }
    }

    /// Closed form of `int_{-1}^{1} w(u)^2 du`.
    pub fn l2_closed_form(self) -> f64 {
        match self {
            Window::Parzen => 151.0 / 280.0,
            Window::Bartlett => 2.0 / 3.0,
            Window::TukeyHanning => 0.75,
            Window::FlatTopTrapezoid => 4.0 / 3.0,
            Window::Rectangular => 2.0,
        }
    }

    /// Whether `lim_{u->0} (1 - w(u)) / u^2` exists and is positive.
    pub fn smooth_at_zero(self) -> bool {
        matches!(self, Window::Parzen | Window::TukeyHanning)
    }

    /// Whether the window is differentiable on `[-1, 1]` in the sense required of lag windows.
    pub fn differentiable(self) -> bool {
        matches!(self, Window::Parzen | Window::TukeyHanning)
    }

    /// Upper bound on `|d/du w(u)^2|` over `[0, 1]`.
    pub fn squared_slope_bound(self) -> f64 {
        match self {
            Window::Parzen => 3.0,
            Window::Bartlett => 2.0,
            Window::TukeyHanning => 2.05,
            Window::FlatTopTrapezoid => 4.0,
            Window::Rectangular => 0.0,
        }
    }

    /// Lag weights `w(j / m_lag)` for `j = 0..=m_lag`.
    pub fn weights(self, m_lag: usize) -> Vec<f64> {
        (0..=m_lag)
            .map(|j| self.eval(j as f64 / m_lag.max(1) as f64))
            .collect()
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Window::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Window::ALL.iter().map(|w| w.name()).collect();
                Error::Config(format!(
                    "unknown window '{s}', expected one of: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Looks a window up by name.
pub fn window(name: &str) -> Result<Window, Error> {
    name.parse()
}

// 5-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Composite Gauss-Legendre quadrature of `f` over `[a, b]` with `panels` equal panels.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            GL_NODES
                .iter()
                .zip(GL_WEIGHTS)
                .map(|(x, wt)| wt * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// `int_{-1}^{1} w(u)^2 du` by quadrature. Panel edges include the breakpoints 0 and ±1/2,
/// so the rule is exact for the piecewise-polynomial windows.
pub fn window_l2(w: Window) -> f64 {
    integrate(|u| w.eval(u).powi(2), -1.0, 1.0, 64)
}
