//! CSV input and output with provenance headers.

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::band::BandResult;
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::sim::{ReplicationRecord, ReportRow};
use crate::spectral::SpectralEstimate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reads the first column of a comma-separated file. A non-numeric first row is taken
/// as a header; blank lines and lines starting with `#` are skipped.
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_series(&text)
}

pub fn parse_series(text: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidInput(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        let field = match record.get(0) {
            Some(f) if !f.is_empty() => f,
            _ => continue,
        };
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(Error::InvalidInput(format!(
                    "line {line}: non-finite value '{field}'"
                )))
            }
            Err(_) if values.is_empty() && i == 0 => continue,
            Err(_) => {
                return Err(Error::InvalidInput(format!(
                    "line {line}: cannot parse '{field}' as a number"
                )))
            }
        }
    }
    TimeSeries::new(values)
}

/// Writes `contents` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| Error::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Resolved run settings, written as `#` comment lines at the top of every output.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub command: String,
    pub seed: Option<u64>,
    pub entries: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str, seed: Option<u64>, entries: Vec<(String, String)>) -> Self {
        Self {
            command: command.to_string(),
            seed,
            entries,
        }
    }

    /// First 16 hex digits of the SHA-256 of the command and entries.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        for (k, v) in &self.entries {
            h.update(b"\n");
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
        }
        h.finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn header(&self) -> String {
        let mut out = format!("# specband {VERSION} {}\n", self.command);
        out.push_str(&format!("# config_hash = {}\n", self.config_hash()));
        if let Some(seed) = self.seed {
            out.push_str(&format!("# seed = {seed}\n"));
        }
        for (k, v) in &self.entries {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out
    }
}

fn to_csv<R>(header: &[&str], rows: R) -> Result<String>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(format!("CSV encoding failed: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(format!("CSV encoding failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn with_header(prov: &Provenance, body: String) -> String {
    let mut out = prov.header();
    out.push_str(&body);
    out
}

pub fn estimate_csv(est: &SpectralEstimate, prov: &Provenance) -> Result<String> {
    let rows = est
        .lambdas
        .iter()
        .zip(&est.values)
        .enumerate()
        .map(|(k, (l, f))| vec![(k + 1).to_string(), l.to_string(), f.to_string()]);
    Ok(with_header(prov, to_csv(&["k", "lambda", "f_hat"], rows)?))
}

pub fn band_csv(band: &BandResult, prov: &Provenance) -> Result<String> {
    let rows = (0..band.len()).map(|k| {
        vec![
            band.lambdas[k].to_string(),
            band.center[k].to_string(),
            band.lower[k].to_string(),
            band.upper[k].to_string(),
        ]
    });
    let mut out = prov.header();
    out.push_str(&format!("# quantile = {}\n", band.quantile));
    for w in &band.warnings {
        out.push_str(&format!("# warning: {w}\n"));
    }
    out.push_str(&to_csv(&["lambda", "f_hat", "lower", "upper"], rows)?);
    Ok(out)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn report_csv(rows: &[ReportRow], prov: &Provenance) -> Result<String> {
    let body = to_csv(
        &[
            "model", "method", "T", "M", "b", "level", "R", "B", "cov", "ml",
        ],
        rows.iter().map(|r| {
            vec![
                r.model.to_string(),
                r.method.to_string(),
                r.series_len.to_string(),
                r.m_lag.to_string(),
                opt(r.bandwidth),
                format!("{}", (1000.0 * (1.0 - r.alpha)).round() / 10.0),
                r.replications.to_string(),
                opt(r.bootstrap_reps),
                format!("{:.1}", r.coverage),
                format!("{:.4}", r.mean_length),
            ]
        }),
    )?;
    Ok(with_header(prov, body))
}

/// One row per replication and alpha.
pub fn replication_log_csv(
    records: &[ReplicationRecord],
    alphas: &[f64],
    prov: &Provenance,
) -> Result<String> {
    let rows = records.iter().flat_map(|rec| {
        alphas.iter().enumerate().map(move |(a, alpha)| {
            vec![
                rec.index.to_string(),
                rec.seed.to_string(),
                alpha.to_string(),
                rec.mean_estimate.to_string(),
                rec.quantiles[a].to_string(),
                (rec.covered[a] as u8).to_string(),
                opt(rec.min_eig_relative),
                opt(rec.clipped_mass),
            ]
        })
    });
    let body = to_csv(
        &[
            "replication",
            "seed",
            "alpha",
            "mean_f_hat",
            "quantile",
            "covered",
            "min_eig_relative",
            "clipped_mass",
        ],
        rows,
    )?;
    Ok(with_header(prov, body))
}
