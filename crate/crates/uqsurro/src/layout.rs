//! Run-directory layout and small file helpers.
//!
//! ```text
//! <run>/data/dataset.csv, manifest.json
//! <run>/pca/model.json, variance.csv, scores.csv
//! <run>/models/<method>/manifest.json, split.json, <response>/...
//! <run>/uq/<method>/predictions.csv, summary.json, [curve_bands.csv, samples.csv, extrapolation.csv]
//! <run>/report/error_bars.csv, summary.csv, [variance_decay.csv, curve_bands.csv]
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use uqsurro_core::{artifact, Method};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }
    pub fn dataset(&self) -> PathBuf {
        self.data_dir().join("dataset.csv")
    }
    pub fn data_manifest(&self) -> PathBuf {
        self.data_dir().join("manifest.json")
    }

    pub fn pca_dir(&self) -> PathBuf {
        self.root.join("pca")
    }
    pub fn pca_model(&self) -> PathBuf {
        self.pca_dir().join("model.json")
    }
    pub fn pca_variance(&self) -> PathBuf {
        self.pca_dir().join("variance.csv")
    }
    pub fn pca_scores(&self) -> PathBuf {
        self.pca_dir().join("scores.csv")
    }

    pub fn models_dir(&self, method: Method) -> PathBuf {
        self.root.join("models").join(method.as_str())
    }
    pub fn models_manifest(&self, method: Method) -> PathBuf {
        self.models_dir(method).join("manifest.json")
    }
    pub fn split(&self, method: Method) -> PathBuf {
        self.models_dir(method).join("split.json")
    }
    pub fn response_dir(&self, method: Method, response: &str) -> PathBuf {
        self.models_dir(method).join(response)
    }

    pub fn uq_dir(&self, method: Method) -> PathBuf {
        self.root.join("uq").join(method.as_str())
    }
    pub fn predictions(&self, method: Method) -> PathBuf {
        self.uq_dir(method).join("predictions.csv")
    }
    pub fn uq_summary(&self, method: Method) -> PathBuf {
        self.uq_dir(method).join("summary.json")
    }
    pub fn curve_bands(&self, method: Method) -> PathBuf {
        self.uq_dir(method).join("curve_bands.csv")
    }
    pub fn samples(&self, method: Method) -> PathBuf {
        self.uq_dir(method).join("samples.csv")
    }
    pub fn extrapolation(&self, method: Method) -> PathBuf {
        self.uq_dir(method).join("extrapolation.csv")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// Refuse to reuse `dir` unless `force`; with `force` its contents are removed.
pub fn prepare_output(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !force {
            return Err(HarnessError::Config(format!(
                "output directory {} already exists; pass --force to overwrite",
                dir.display()
            )));
        }
        std::fs::remove_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// Fail with the list of missing files, if any.
pub fn require_files(stage: &str, paths: &[PathBuf]) -> Result<()> {
    let missing: Vec<String> = paths
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Data(format!(
            "{stage} needs artifacts that are missing:\n  {}",
            missing.join("\n  ")
        )))
    }
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    artifact::save_json(path, value).map_err(|e| HarnessError::core(&format!("writing {}", path.display()), e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    artifact::load_json(path).map_err(|e| HarnessError::Data(format!("reading {}: {e}", path.display())))
}

/// Write a CSV (header plus string rows) atomically.
pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| HarnessError::Data(format!("writing {}: {e}", path.display()));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row.iter().map(AsRef::as_ref)).map_err(wrap)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Data(format!("writing {}: {e}", path.display())))?;
    artifact::write_atomic(path, &bytes).map_err(|e| HarnessError::core(&format!("writing {}", path.display()), e))
}

/// Read a CSV as its header and string rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let wrap = |e: csv::Error| HarnessError::Data(format!("reading {}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(wrap)?;
    let header = r.headers().map_err(wrap)?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(wrap)?.iter().map(str::to_owned).collect());
    }
    Ok((header, rows))
}

/// Column index by name, or a data error naming the file.
pub fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| HarnessError::Data(format!("{}: column `{name}` missing", path.display())))
}

pub fn parse_f64(cell: &str, path: &Path, row: usize, col: &str) -> Result<f64> {
    cell.parse().map_err(|_| {
        HarnessError::Data(format!(
            "{}: row {row}, column {col}: `{cell}` is not a number",
            path.display()
        ))
    })
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt(v: f64) -> String {
    v.to_string()
}
