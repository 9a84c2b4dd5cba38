//! File formats: CSV with exact decimal floats, raw little-endian `f64`,
//! and the JSON metadata sidecar written next to simulation output.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Header `t,path_0,...`, one row per grid point.
    Csv,
    /// Little-endian float64, path after path, no header.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    /// fBm values `B_0 = 0, B_Delta, ..., B_T`.
    Fbm,
    /// Increments `B_{k Delta} - B_{(k-1) Delta}`, `k = 1..N`.
    Fgn,
}

/// Everything needed to regenerate a simulation output bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub library: String,
    pub version: String,
    pub kind: SeriesKind,
    pub hurst: f64,
    /// Number of fGn samples per path.
    pub n: usize,
    /// Exponent when `n = 2^q + 1`.
    pub q: Option<u32>,
    /// Values per path in the file.
    pub points: usize,
    pub count: usize,
    pub horizon: f64,
    pub spacing: f64,
    pub seed: u64,
    /// True when no seed was given and one was drawn at random.
    pub seed_generated: bool,
    pub format: Format,
    pub rng: String,
}

pub const RNG_DESCRIPTION: &str =
    "chacha8; seed_from_u64(seed), stream = path index; M f64 standard normals per path";

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_metadata(output: &Path, meta: &Metadata) -> Result<()> {
    let path = sidecar_path(output);
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))
}

pub fn read_metadata(output: &Path) -> Result<Option<Metadata>> {
    let path = sidecar_path(output);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// 17 significant digits: parses back to the identical `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Named columns read from a file, with the time column split off when
/// present.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub times: Option<Vec<f64>>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

pub fn write_csv<W: Write>(mut w: W, times: &[f64], columns: &[Vec<f64>]) -> std::io::Result<()> {
    let mut line = String::from("t");
    for i in 0..columns.len() {
        line.push_str(&format!(",path_{i}"));
    }
    writeln!(w, "{line}")?;
    for (row, &t) in times.iter().enumerate() {
        line.clear();
        line.push_str(&format_float(t));
        for c in columns {
            line.push(',');
            line.push_str(&format_float(c[row]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

/// Reads numeric columns. A first line that does not parse as numbers is a
/// header; a header column named `t` is taken as the time axis. Without a
/// header every column is a series named `col_<i>`.
pub fn read_csv<R: Read>(r: R) -> Result<SeriesTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r);
    let mut records = reader.records();
    let first = match records.next() {
        Some(rec) => rec.map_err(|e| Error::Format(e.to_string()))?,
        None => return Err(Error::Format("empty input".into())),
    };
    let numeric: Option<Vec<f64>> = first.iter().map(|f| f.parse::<f64>().ok()).collect();
    let width = first.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let names: Vec<String> = match numeric {
        Some(values) => {
            rows.push(check_finite(values, 1)?);
            (0..width).map(|i| format!("col_{i}")).collect()
        }
        None => first.iter().map(str::to_owned).collect(),
    };
    for rec in records {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let values = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {line}: `{f}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(check_finite(values, line)?);
    }
    if rows.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    let mut columns: Vec<Vec<f64>> = (0..width)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let mut names = names;
    let times = if names.first().is_some_and(|n| n.eq_ignore_ascii_case("t")) {
        names.remove(0);
        Some(columns.remove(0))
    } else {
        None
    };
    if columns.is_empty() {
        return Err(Error::Format("no series columns".into()));
    }
    Ok(SeriesTable {
        times,
        names,
        columns,
    })
}

fn check_finite(values: Vec<f64>, line: u64) -> Result<Vec<f64>> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(Error::Format(format!("line {line}: non-finite value {v}"))),
        None => Ok(values),
    }
}

pub fn write_raw<W: Write>(mut w: W, columns: &[Vec<f64>]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(columns.iter().map(Vec::len).sum::<usize>() * 8);
    for c in columns {
        for &x in c {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()
}

/// Splits raw little-endian `f64` data into `count` equal series; a single
/// series when `count` is `None`.
pub fn read_raw(bytes: &[u8], count: Option<usize>) -> Result<SeriesTable> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(8) {
        return Err(Error::Format(format!(
            "raw input of {} bytes is not a whole number of float64 values",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    let count = count.unwrap_or(1);
    if count == 0 || !values.len().is_multiple_of(count) {
        return Err(Error::Format(format!(
            "{} values cannot be split into {count} series",
            values.len()
        )));
    }
    let values = check_finite(values, 0)?;
    let points = values.len() / count;
    Ok(SeriesTable {
        times: None,
        names: (0..count).map(|i| format!("path_{i}")).collect(),
        columns: values.chunks_exact(points).map(<[f64]>::to_vec).collect(),
    })
}

/// Reads a series file, using the metadata sidecar (when present) to split
/// raw data into paths. `format` defaults to the sidecar's, then to raw for
/// `.bin`/`.raw`/`.f64` extensions, then CSV.
pub fn read_series_file(path: &Path, format: Option<Format>) -> Result<SeriesTable> {
    let meta = read_metadata(path)?;
    let format = format
        .or(meta.as_ref().map(|m| m.format))
        .unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
            Some("bin" | "raw" | "f64") => Format::Raw,
            _ => Format::Csv,
        });
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    match format {
        Format::Csv => read_csv(bytes.as_slice()),
        Format::Raw => read_raw(&bytes, meta.map(|m| m.count)),
    }
}
