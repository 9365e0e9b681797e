//! Multi-view datasets stored as a directory of CSV files.
//!
//! Layout: `view_1.csv ... view_V.csv` (one row per sample, one column per
//! feature), an optional `labels.csv` (one nonnegative integer per line) and
//! an optional `manifest.json` naming the views. Every CSV may start with a
//! single header row, detected by a non-numeric first row.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    /// View `v` is `d_v x N`; columns are samples.
    pub views: Vec<DMatrix<f64>>,
    pub labels: Option<Vec<usize>>,
    pub names: Vec<String>,
}

impl MultiViewDataset {
    pub fn new(
        views: Vec<DMatrix<f64>>,
        labels: Option<Vec<usize>>,
        names: Vec<String>,
    ) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset has no views".into()))?;
        let n = first.ncols();
        if n == 0 {
            return Err(Error::InvalidArgument("dataset has no samples".into()));
        }
        if names.len() != views.len() {
            return Err(Error::dims("view names", views.len(), names.len()));
        }
        for (name, v) in names.iter().zip(&views).skip(1) {
            if v.ncols() != n {
                return Err(Error::InconsistentSamples {
                    first_name: names[0].clone(),
                    first: n,
                    other_name: name.clone(),
                    other: v.ncols(),
                });
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InconsistentSamples {
                    first_name: names[0].clone(),
                    first: n,
                    other_name: LABELS_FILE.into(),
                    other: l.len(),
                });
            }
        }
        Ok(MultiViewDataset {
            views,
            labels,
            names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].ncols()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    /// Number of distinct labels, if labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            l.iter()
                .copied()
                .collect::<std::collections::BTreeSet<_>>()
                .len()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub name: String,
    pub file: String,
    pub dims: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub samples: usize,
    pub views: Vec<ViewEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    /// Per-view kernel defaults, when the manifest lists one for every view.
    pub fn kernels(&self) -> Option<Vec<KernelSpec>> {
        self.views.iter().map(|v| v.kernel).collect()
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a numeric CSV into rows, skipping a single non-numeric header row.
pub fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Csv(e),
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| parse_error(path, line, e.to_string()))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                    return Err(parse_error(
                        path,
                        line,
                        format!("non-finite value in column {}", bad + 1),
                    ));
                }
                rows.push(values);
            }
            Err(_) if idx == 0 => continue,
            Err(_) => {
                let col = record
                    .iter()
                    .position(|c| c.parse::<f64>().is_err())
                    .unwrap_or(0);
                return Err(parse_error(
                    path,
                    line,
                    format!("non-numeric cell {:?} in column {}", &record[col], col + 1),
                ));
            }
        }
    }
    Ok(rows)
}

/// Reads a `d x N` view from a CSV with one sample per row.
pub fn read_view(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_numeric_csv(path)?;
    if rows.is_empty() {
        return Err(parse_error(path, 1, "no data rows"));
    }
    let d = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != d) {
        return Err(parse_error(path, i + 1, format!("expected {d} columns")));
    }
    Ok(DMatrix::from_fn(d, rows.len(), |f, s| rows[s][f]))
}

/// Reads one integer label per row (first column) of a CSV.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    Ok(read_label_columns(path)?
        .0
        .into_iter()
        .next()
        .unwrap_or_default())
}

/// Reads every column of an integer CSV, returning the columns and the header
/// (if one was present).
pub fn read_label_columns(path: &Path) -> Result<(Vec<Vec<usize>>, Option<Vec<String>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut columns: Vec<Vec<usize>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<usize>, _> =
            cells.iter().map(|c| c.parse::<usize>()).collect();
        match parsed {
            Ok(values) => {
                if columns.is_empty() {
                    columns = vec![Vec::new(); values.len()];
                }
                if values.len() != columns.len() {
                    return Err(parse_error(path, idx + 1, "inconsistent column count"));
                }
                for (c, v) in columns.iter_mut().zip(values) {
                    c.push(v);
                }
            }
            Err(_) if idx == 0 && cells.iter().any(|c| c.parse::<f64>().is_err()) => {
                header = Some(cells.iter().map(|s| s.to_string()).collect());
            }
            Err(_) => {
                return Err(parse_error(
                    path,
                    idx + 1,
                    format!("labels must be nonnegative integers, got {line:?}"),
                ))
            }
        }
    }
    if columns.is_empty() {
        return Err(parse_error(path, 1, "no labels"));
    }
    Ok((columns, header))
}

/// Loads `dir/view_*.csv` (or the files listed in `manifest.json`) and `labels.csv`.
pub fn load_dataset(dir: &Path) -> Result<MultiViewDataset> {
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_path_buf()));
    }
    let manifest = Manifest::read(dir)?;
    let entries: Vec<(String, PathBuf)> = match &manifest {
        Some(m) => m
            .views
            .iter()
            .map(|v| (v.name.clone(), dir.join(&v.file)))
            .collect(),
        None => (1..)
            .map(|v| (format!("view_{v}"), dir.join(format!("view_{v}.csv"))))
            .take_while(|(_, p)| p.exists())
            .collect(),
    };
    if entries.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no view_1.csv found in {}",
            dir.display()
        )));
    }
    let mut views = Vec::with_capacity(entries.len());
    let mut names: Vec<String> = Vec::with_capacity(entries.len());
    for (name, path) in entries {
        if !path.exists() {
            return Err(Error::io(
                &path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "view file listed but missing"),
            ));
        }
        let view = read_view(&path)?;
        if let Some(first) = views.first() {
            let first: &DMatrix<f64> = first;
            if view.ncols() != first.ncols() {
                return Err(Error::InconsistentSamples {
                    first_name: names[0].clone(),
                    first: first.ncols(),
                    other_name: name,
                    other: view.ncols(),
                });
            }
        }
        views.push(view);
        names.push(name);
    }
    let labels_name = manifest
        .as_ref()
        .and_then(|m| m.labels.clone())
        .unwrap_or_else(|| LABELS_FILE.to_string());
    let labels_path = dir.join(labels_name);
    let labels = if labels_path.exists() {
        Some(read_labels(&labels_path)?)
    } else {
        None
    };
    MultiViewDataset::new(views, labels, names)
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// CSV text of a matrix, one matrix row per line, shortest round-trip floats.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Writes the dataset in the layout [`load_dataset`] reads, plus a manifest.
pub fn save_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<()> {
    save_dataset_with_kernels(ds, dir, None)
}

pub fn save_dataset_with_kernels(
    ds: &MultiViewDataset,
    dir: &Path,
    kernels: Option<&[KernelSpec]>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (v, (view, name)) in ds.views.iter().zip(&ds.names).enumerate() {
        let file = format!("view_{}.csv", v + 1);
        write_file(&dir.join(&file), matrix_csv(&view.transpose()).as_bytes())?;
        entries.push(ViewEntry {
            name: name.clone(),
            file,
            dims: view.nrows(),
            kernel: kernels.and_then(|k| k.get(v).copied()),
        });
    }
    if let Some(labels) = &ds.labels {
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        write_file(&dir.join(LABELS_FILE), text.as_bytes())?;
    }
    let manifest = Manifest {
        samples: ds.n_samples(),
        views: entries,
        labels: ds.labels.as_ref().map(|_| LABELS_FILE.to_string()),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    write_file(&dir.join(MANIFEST_FILE), json.as_bytes())
}
