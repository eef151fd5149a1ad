//! Dataset files: CSV (one point per line) and packed binary records
//! (`i32` little-endian dimension followed by that many `f32` little-endian
//! coordinates, repeated).

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Bin,
}

impl Format {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" | "txt" => Some(Self::Csv),
            "bin" | "fvecs" => Some(Self::Bin),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "bin" | "fvecs" | "packed" => Ok(Self::Bin),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Bin => "bin",
        })
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown dataset format `{0}`")]
    UnknownFormat(String),
    #[error("line {line}, column {column}: cannot parse `{text}` as a number")]
    Parse { line: usize, column: usize, text: String },
    #[error("line {line}, column {column}: non-finite value")]
    NonFiniteCsv { line: usize, column: usize },
    #[error("line {line}: expected {expected} values, found {found}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("byte offset {offset}: {reason}")]
    Binary { offset: usize, reason: String },
    #[error("point {index}: expected dimension {expected}, found {found}")]
    Dimension { index: usize, expected: usize, found: usize },
    #[error("point {index}, coordinate {coordinate}: non-finite value")]
    NonFinite { index: usize, coordinate: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Points with ids `0..n` in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, DatasetError> {
        let dim = points.first().map_or(0, Vec::len);
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(DatasetError::Dimension { index, expected: dim, found: p.len() });
            }
            if let Some(coordinate) = p.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { index, coordinate });
            }
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    /// SHA-256 over the dimension, the count and every coordinate's bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"nnwfn-dataset");
        h.update((self.dim as u64).to_le_bytes());
        h.update((self.points.len() as u64).to_le_bytes());
        for p in &self.points {
            for v in p {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

pub fn parse_csv(text: &str) -> Result<Dataset, DatasetError> {
    let mut points = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (j, field) in line.split(',').enumerate() {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| DatasetError::Parse { line: line_no, column: j + 1, text: field.to_string() })?;
            if !v.is_finite() {
                return Err(DatasetError::NonFiniteCsv { line: line_no, column: j + 1 });
            }
            row.push(v);
        }
        let expected = *dim.get_or_insert(row.len());
        if row.len() != expected {
            return Err(DatasetError::Ragged { line: line_no, expected, found: row.len() });
        }
        points.push(row);
    }
    Dataset::new(points)
}

pub fn parse_packed(bytes: &[u8]) -> Result<Dataset, DatasetError> {
    let mut points = Vec::new();
    let mut offset = 0;
    let mut dim = None;
    while offset < bytes.len() {
        let header = bytes
            .get(offset..offset + 4)
            .ok_or_else(|| DatasetError::Binary { offset, reason: "truncated dimension header".into() })?;
        let d = i32::from_le_bytes(header.try_into().expect("4 bytes"));
        if d <= 0 {
            return Err(DatasetError::Binary { offset, reason: format!("dimension {d} must be positive") });
        }
        let d = d as usize;
        let expected = *dim.get_or_insert(d);
        if d != expected {
            return Err(DatasetError::Binary { offset, reason: format!("dimension {d} differs from {expected}") });
        }
        let body_start = offset + 4;
        let body = bytes
            .get(body_start..body_start + 4 * d)
            .ok_or_else(|| DatasetError::Binary { offset: body_start, reason: format!("record needs {} bytes", 4 * d) })?;
        let mut row = Vec::with_capacity(d);
        for (j, chunk) in body.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(DatasetError::Binary { offset: body_start + 4 * j, reason: "non-finite value".into() });
            }
            row.push(v as f64);
        }
        points.push(row);
        offset = body_start + 4 * d;
    }
    Dataset::new(points)
}

/// Packed records; coordinates are narrowed to `f32`.
pub fn encode_packed(dataset: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(dataset.len() * (4 + 4 * dataset.dim()));
    for p in dataset.points() {
        out.extend((p.len() as i32).to_le_bytes());
        for &v in p {
            out.extend((v as f32).to_le_bytes());
        }
    }
    out
}

pub fn encode_csv(dataset: &Dataset) -> String {
    let mut out = String::new();
    for p in dataset.points() {
        let line: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn load_dataset(path: &Path, format: Format) -> Result<Dataset, DatasetError> {
    let io = |source| DatasetError::Io { path: path.display().to_string(), source };
    match format {
        Format::Csv => parse_csv(&std::fs::read_to_string(path).map_err(io)?),
        Format::Bin => parse_packed(&std::fs::read(path).map_err(io)?),
    }
}

pub fn save_dataset(path: &Path, dataset: &Dataset, format: Format) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io { path: path.display().to_string(), source };
    let bytes = match format {
        Format::Csv => encode_csv(dataset).into_bytes(),
        Format::Bin => encode_packed(dataset),
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&bytes).map_err(io)
}
