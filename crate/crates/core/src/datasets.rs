//! Bundled univariate benchmark datasets, standardized on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetName {
    /// Old Faithful eruption durations.
    Faithful,
    /// Velocities of 82 galaxies.
    Galaxies,
    /// Iris petal lengths.
    Iris,
    /// Perimeters of rock samples.
    Rock,
}

impl DatasetName {
    pub const ALL: [DatasetName; 4] = [
        DatasetName::Faithful,
        DatasetName::Galaxies,
        DatasetName::Iris,
        DatasetName::Rock,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "faithful" | "faithful-eruptions" => Ok(DatasetName::Faithful),
            "galaxies" | "galaxy" => Ok(DatasetName::Galaxies),
            "iris" | "iris-petal-length" => Ok(DatasetName::Iris),
            "rock" | "rock-peri" => Ok(DatasetName::Rock),
            other => Err(Error::InvalidConfig(format!(
                "unknown dataset '{other}' (expected faithful, galaxies, iris or rock)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Faithful => "faithful",
            DatasetName::Galaxies => "galaxies",
            DatasetName::Iris => "iris",
            DatasetName::Rock => "rock",
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            DatasetName::Faithful => "eruptions",
            DatasetName::Galaxies => "velocity",
            DatasetName::Iris => "petal_length",
            DatasetName::Rock => "peri",
        }
    }

    pub fn expected_len(self) -> usize {
        match self {
            DatasetName::Faithful => 272,
            DatasetName::Galaxies => 82,
            DatasetName::Iris => 150,
            DatasetName::Rock => 48,
        }
    }

    fn embedded(self) -> &'static str {
        match self {
            DatasetName::Faithful => include_str!("../data/faithful.csv"),
            DatasetName::Galaxies => include_str!("../data/galaxies.csv"),
            DatasetName::Iris => include_str!("../data/iris.csv"),
            DatasetName::Rock => include_str!("../data/rock.csv"),
        }
    }
}

impl std::fmt::Display for DatasetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealDataset<T> {
    pub name: DatasetName,
    pub raw: Vec<T>,
    pub standardized: Vec<T>,
    pub mean: T,
    pub sd: T,
}

impl<T: Real> RealDataset<T> {
    pub fn n(&self) -> usize {
        self.raw.len()
    }

    fn from_raw(name: DatasetName, raw: Vec<T>) -> Result<Self> {
        if raw.len() != name.expected_len() {
            return Err(Error::InvalidInput(format!(
                "dataset {name} has {} rows, expected {}",
                raw.len(),
                name.expected_len()
            )));
        }
        let (standardized, mean, sd) = standardize(&raw)?;
        Ok(RealDataset {
            name,
            raw,
            standardized,
            mean,
            sd,
        })
    }
}

/// `(x - mean) / sd` with the `n - 1` standard deviation.
pub fn standardize<T: Real>(x: &[T]) -> Result<(Vec<T>, T, T)> {
    if x.len() < 2 {
        return Err(Error::InvalidInput("standardization needs at least two values".into()));
    }
    let n = T::from_usize(x.len()).unwrap();
    let mean = x.iter().copied().sum::<T>() / n;
    let sd = (x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one())).sqrt();
    if !(sd > T::zero()) {
        return Err(Error::InvalidInput("constant data cannot be standardized".into()));
    }
    Ok((x.iter().map(|&v| (v - mean) / sd).collect(), mean, sd))
}

fn parse_column<T: Real>(text: &str, name: DatasetName, origin: &str) -> Result<Vec<T>> {
    let perr = |message: String| Error::Parse {
        path: origin.into(),
        message,
    };
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == name.column())
        .ok_or_else(|| perr(format!("missing column '{}'", name.column())))?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = rec
            .get(col)
            .ok_or_else(|| perr(format!("row {} has no column {col}", line + 2)))?;
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| perr(format!("row {}: '{field}' is not a number", line + 2)))?;
        out.push(T::lit(v));
    }
    Ok(out)
}

/// Loads the copy bundled into the library.
pub fn load<T: Real>(name: DatasetName) -> Result<RealDataset<T>> {
    let raw = parse_column(name.embedded(), name, &format!("<bundled {name}>"))?;
    RealDataset::from_raw(name, raw)
}

/// Loads a CSV from disk with the same header and row-count checks.
pub fn load_from_path<T: Real>(name: DatasetName, path: &Path) -> Result<RealDataset<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw = parse_column(&text, name, &path.display().to_string())?;
    RealDataset::from_raw(name, raw)
}
