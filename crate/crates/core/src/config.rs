//! Flat `key = value` study files.
//!
//! ```text
//! # Model I, bootstrap band
//! model = I
//! T = 256
//! m_lag = 10
//! bandwidth = 1.0, 1.5, 2.0
//! alpha = 0.1, 0.05
//! ```
//!
//! `model`, `T`, `m_lag`, `method` and `bandwidth` accept comma-separated lists and
//! expand into one experiment per combination, in that nesting order. `alpha` lists stay
//! within a single experiment.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::band::BandMethod;
use crate::error::{Error, Result};
use crate::sim::{ExperimentConfig, Model};

const KEYS: &[&str] = &[
    "model",
    "T",
    "m_lag",
    "bandwidth",
    "alpha",
    "replications",
    "bootstrap_reps",
    "window",
    "method",
    "target",
    "target_reps",
    "seed",
    "burn_in",
    "demean",
    "cov_kernel",
    "kernel_scale",
    "truncation",
    "eig_clip_tol",
    "gumbel_w2",
];

/// Parsed `key -> raw value` pairs, with the line each key came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {line_no}: expected 'key = value', got '{line}'"
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "line {line_no}: unknown key '{key}'; valid keys: {}",
                    KEYS.join(", ")
                )));
            }
            if value.is_empty() {
                return Err(Error::Config(format!(
                    "line {line_no}: '{key}' has no value"
                )));
            }
            if entries
                .insert(key.to_string(), (line_no, value.to_string()))
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {line_no}: duplicate key '{key}'"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some((line, value)) = self.entries.get(key) else {
            return Ok(None);
        };
        value
            .split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<T>().map_err(|e| {
                    Error::Config(format!(
                        "line {line}: cannot parse '{item}' for '{key}': {e}"
                    ))
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn single<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.list::<T>(key)? {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(v.into_iter().next()),
            Some(_) => Err(Error::Config(format!(
                "line {}: '{key}' takes a single value",
                self.entries[key].0
            ))),
        }
    }

    fn required<T>(&self, key: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.list(key)?
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }
}

/// Expands a study file into validated experiment cells.
pub fn parse_study(text: &str) -> Result<Vec<ExperimentConfig>> {
    let raw = RawConfig::parse(text)?;
    let models: Vec<Model> = raw.required("model")?;
    let lens: Vec<usize> = raw.required("T")?;
    let lags: Vec<usize> = raw.required("m_lag")?;
    let methods: Vec<BandMethod> = raw.list("method")?.unwrap_or(vec![BandMethod::Bootstrap]);
    let bandwidths: Option<Vec<f64>> = raw.list("bandwidth")?;
    if bandwidths.is_none() && methods.contains(&BandMethod::Bootstrap) {
        return Err(Error::Config(
            "missing required key 'bandwidth' for the bootstrap method".into(),
        ));
    }

    let mut out = Vec::new();
    for &model in &models {
        for &t in &lens {
            for &m in &lags {
                for &method in &methods {
                    let bws = match (method, &bandwidths) {
                        (BandMethod::Bootstrap, Some(b)) => b.clone(),
                        (_, Some(b)) => vec![b[0]],
                        (_, None) => vec![1.0],
                    };
                    for b in bws {
                        let mut cfg = ExperimentConfig::new(model, t, m, b);
                        cfg.method = method;
                        apply_scalars(&raw, &mut cfg)?;
                        cfg.validate()?;
                        out.push(cfg);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn apply_scalars(raw: &RawConfig, cfg: &mut ExperimentConfig) -> Result<()> {
    if let Some(a) = raw.list("alpha")? {
        cfg.alphas = a;
    }
    macro_rules! set {
        ($key:literal, $field:expr) => {
            if let Some(v) = raw.single($key)? {
                $field = v;
            }
        };
    }
    set!("replications", cfg.replications);
    set!("bootstrap_reps", cfg.bootstrap_reps);
    set!("window", cfg.window);
    set!("target", cfg.target);
    set!("target_reps", cfg.target_reps);
    set!("seed", cfg.seed);
    set!("burn_in", cfg.burn_in);
    set!("demean", cfg.demean);
    set!("cov_kernel", cfg.kernel);
    set!("kernel_scale", cfg.kernel_scale);
    set!("truncation", cfg.truncation);
    set!("eig_clip_tol", cfg.eig_clip_tol);
    if let Some(w2) = raw.single("gumbel_w2")? {
        cfg.gumbel_w2 = Some(w2);
    }
    Ok(())
}
