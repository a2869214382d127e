//! Text file formats: batch files, parameter (`θ`) files, flat `key=value`
//! configuration files and the run manifest.
//!
//! Batch file: a header line `p,n,t`, then `n` rows of `2p` comma-separated
//! fields `x[0].re, x[0].im, x[1].re, ...`. Parameter file: a header `p,n`,
//! then `p` rows of `2p` fields holding `Σ` row-major (interleaved real and
//! imaginary parts), then one row of `n` texture fields. UTF-8, LF endings,
//! floats in shortest round-trip exponent notation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::DataBatch;
use crate::hermitian::{CMatrix, HpdMatrix, C64};
use crate::manifold::{CgPoint, TextureVector, UnitDetHpd};

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("{}:{}", path_str(path), line),
        message: message.into(),
    }
}

/// Writes `contents` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("{} is not a file path", path_str(path))))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path_str(path), e));
    }
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path_str(path), e))
}

fn push_fields(out: &mut String, fields: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in fields {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{v:e}");
    }
    out.push('\n');
}

fn parse_floats(path: &Path, line_no: usize, line: &str, expected: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != expected {
        return Err(parse_error(
            path,
            line_no,
            format!("expected {expected} fields, found {}", fields.len()),
        ));
    }
    fields
        .iter()
        .enumerate()
        .map(|(k, f)| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(path, line_no, format!("field {}: {f:?} is not a finite number", k + 1)))
        })
        .collect()
}

fn parse_header(path: &Path, line: Option<&str>, names: &[&str]) -> Result<Vec<usize>> {
    let line = line.ok_or_else(|| parse_error(path, 1, "empty file"))?;
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != names.len() {
        return Err(parse_error(
            path,
            1,
            format!("header must be {}, found {line:?}", names.join(",")),
        ));
    }
    fields
        .iter()
        .zip(names)
        .map(|(f, name)| {
            f.parse::<usize>().map_err(|_| {
                parse_error(
                    path,
                    1,
                    format!("header field {name}: {f:?} is not a non-negative integer"),
                )
            })
        })
        .collect()
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(|l| l.trim_end_matches('\r'))
}

pub fn format_batch(batch: &DataBatch) -> String {
    let x = batch.samples();
    let mut out = format!("{},{},{}\n", batch.p(), batch.n(), batch.t());
    for i in 0..batch.n() {
        push_fields(&mut out, x.column(i).iter().flat_map(|z| [z.re, z.im]));
    }
    out
}

pub fn parse_batch(path: &Path, text: &str) -> Result<DataBatch> {
    let mut lines = data_lines(text);
    let h = parse_header(path, lines.next(), &["p", "n", "t"])?;
    let (p, n, t) = (h[0], h[1], h[2]);
    if p == 0 || n == 0 {
        return Err(parse_error(path, 1, "p and n must be positive"));
    }
    let mut samples = CMatrix::zeros(p, n);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| parse_error(path, i + 2, format!("expected {n} sample rows, found {i}")))?;
        let v = parse_floats(path, i + 2, line, 2 * p)?;
        for k in 0..p {
            samples[(k, i)] = C64::new(v[2 * k], v[2 * k + 1]);
        }
    }
    if let Some((k, _)) = lines.enumerate().find(|(_, l)| !l.trim().is_empty()) {
        return Err(parse_error(path, n + 2 + k, "unexpected trailing data"));
    }
    DataBatch::new(samples, t).map_err(|e| parse_error(path, 1, e.to_string()))
}

pub fn write_batch(path: &Path, batch: &DataBatch) -> Result<()> {
    write_atomic(path, format_batch(batch).as_bytes())
}

pub fn read_batch(path: &Path) -> Result<DataBatch> {
    parse_batch(path, &read_to_string(path)?)
}

/// File name used for the batch at time `t`.
pub fn batch_file_name(t: usize) -> String {
    format!("batch_{t:05}.csv")
}

/// Reads every `batch_*.csv` file in `dir`, sorted by time index, and checks
/// that they share `(p, n)` and have distinct times.
pub fn read_batch_dir(dir: &Path) -> Result<Vec<DataBatch>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(path_str(dir), e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(path_str(dir), e))?.path();
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if name.starts_with("batch_") && name.ends_with(".csv") {
            paths.push(path);
        }
    }
    if paths.is_empty() {
        return Err(Error::io(
            path_str(dir),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no batch_*.csv files"),
        ));
    }
    let mut batches = paths.iter().map(|p| read_batch(p)).collect::<Result<Vec<_>>>()?;
    batches.sort_by_key(|b| b.t());
    for w in batches.windows(2) {
        if w[0].t() == w[1].t() {
            return Err(Error::input(format!("two batches share time index {}", w[0].t())));
        }
        if w[0].p() != w[1].p() || w[0].n() != w[1].n() {
            return Err(Error::dim(format!(
                "batch t={} is {}x{} but batch t={} is {}x{}",
                w[0].t(),
                w[0].p(),
                w[0].n(),
                w[1].t(),
                w[1].p(),
                w[1].n()
            )));
        }
    }
    Ok(batches)
}

pub fn format_theta(sigma: &CMatrix, tau: &[f64]) -> String {
    let p = sigma.nrows();
    let mut out = format!("{},{}\n", p, tau.len());
    for r in 0..p {
        push_fields(&mut out, (0..p).flat_map(|c| [sigma[(r, c)].re, sigma[(r, c)].im]));
    }
    push_fields(&mut out, tau.iter().copied());
    out
}

/// Parses a parameter file. `Σ` is required to be HPD but not to have unit
/// determinant, so arithmetic-mean estimates round-trip too.
pub fn parse_theta(path: &Path, text: &str) -> Result<(HpdMatrix, TextureVector)> {
    let mut lines = data_lines(text);
    let h = parse_header(path, lines.next(), &["p", "n"])?;
    let (p, n) = (h[0], h[1]);
    if p == 0 || n == 0 {
        return Err(parse_error(path, 1, "p and n must be positive"));
    }
    let mut sigma = CMatrix::zeros(p, p);
    for r in 0..p {
        let line = lines
            .next()
            .ok_or_else(|| parse_error(path, r + 2, format!("expected {p} matrix rows")))?;
        let v = parse_floats(path, r + 2, line, 2 * p)?;
        for c in 0..p {
            sigma[(r, c)] = C64::new(v[2 * c], v[2 * c + 1]);
        }
    }
    let line = lines
        .next()
        .ok_or_else(|| parse_error(path, p + 2, "missing texture row"))?;
    let tau = parse_floats(path, p + 2, line, n)?;
    let sigma = HpdMatrix::new(sigma).map_err(|e| parse_error(path, 2, e.to_string()))?;
    let tau = TextureVector::new(tau).map_err(|e| parse_error(path, p + 2, e.to_string()))?;
    Ok((sigma, tau))
}

pub fn write_theta(path: &Path, sigma: &CMatrix, tau: &[f64]) -> Result<()> {
    write_atomic(path, format_theta(sigma, tau).as_bytes())
}

pub fn write_point(path: &Path, theta: &CgPoint) -> Result<()> {
    write_theta(path, theta.sigma().as_matrix(), theta.tau())
}

pub fn read_theta(path: &Path) -> Result<(HpdMatrix, TextureVector)> {
    parse_theta(path, &read_to_string(path)?)
}

/// Reads a parameter file whose `Σ` has unit determinant.
pub fn read_point(path: &Path) -> Result<CgPoint> {
    let (sigma, tau) = read_theta(path)?;
    let sigma = UnitDetHpd::new(sigma).map_err(|e| parse_error(path, 2, e.to_string()))?;
    Ok(CgPoint::new(sigma, tau))
}

/// Flat `key = value` configuration. Blank lines and lines starting with `#`
/// are ignored; every value remembers its line for diagnostics.
#[derive(Clone, Debug, Default)]
pub struct KeyValueConfig {
    source: String,
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyValueConfig {
    pub fn parse(source: &str, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in data_lines(text).enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let location = || format!("{source}:{}", k + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                location: location(),
                message: format!("expected key=value, found {line:?}"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    location: location(),
                    message: "empty key".into(),
                });
            }
            if let Some((_, first)) = entries.insert(key.clone(), (value.trim().to_string(), k + 1)) {
                return Err(Error::Parse {
                    location: location(),
                    message: format!("key {key:?} already set on line {first}"),
                });
            }
        }
        Ok(Self {
            source: source.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&path_str(path), &read_to_string(path)?)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Parsed value of `key`, or `None` when absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|e| Error::Parse {
                location: format!("{}:{line}", self.source),
                message: format!("field {key}: {e}"),
            }),
        }
    }

    /// Errors on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        for (key, (_, line)) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Parse {
                    location: format!("{}:{line}", self.source),
                    message: format!("unknown field {key:?}"),
                });
            }
        }
        Ok(())
    }
}

/// Record written next to every command output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub duration_secs: f64,
    pub outputs: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Writes `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::input(e.to_string()))?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_to_string(path)?).map_err(|e| Error::Parse {
            location: path_str(path),
            message: e.to_string(),
        })
    }
}
