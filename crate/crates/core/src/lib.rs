//! Lag-window spectral density estimation with simultaneous confidence bands.

pub mod band;
pub mod checks;
pub mod config;
pub mod error;
pub mod io;
pub mod longrun;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod series;
pub mod sim;
pub mod spectral;
pub mod window;

pub use error::{Error, Result};
