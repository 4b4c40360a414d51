//! File formats owned by the command-line tool.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use geom_deeponet::geometry::{DesignParams, ShapeFamily, Vec3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// `out.jsonl` → `out.config.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.config.json"))
}

/// A JSON report with the effective config embedded next to its fields.
#[derive(Serialize)]
pub struct WithConfig<'a, T: Serialize> {
    pub config: &'a Value,
    #[serde(flatten)]
    pub body: &'a T,
}

/// One point per line as `[x, y, z]`.
pub fn read_points(path: &Path) -> Result<Vec<Vec3>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let [x, y, z]: [f64; 3] = serde_json::from_str(line)
            .map_err(|e| CliError::usage(format!("{}: line {}: {e}", path.display(), k + 1)))?;
        out.push(Vec3::new(x, y, z));
    }
    if out.is_empty() {
        return Err(CliError::usage(format!("{} contains no points", path.display())));
    }
    Ok(out)
}

/// `{"family": ..., "params": {name: value}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub family: ShapeFamily,
    pub params: BTreeMap<String, f64>,
}

impl ParamsFile {
    pub fn from_design(d: &DesignParams) -> Self {
        Self {
            family: d.family(),
            params: d.named().map(|(n, v)| (n.to_string(), v)).collect(),
        }
    }

    pub fn read(path: &Path) -> Result<DesignParams, CliError> {
        let file: ParamsFile = serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let named: Vec<(&str, f64)> = file.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        Ok(DesignParams::from_named(file.family, &named)?)
    }
}

/// One line of a predictions file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub id: String,
    pub family: ShapeFamily,
    pub c: usize,
    /// `n` rows of `c` values.
    pub values: Vec<Vec<f64>>,
}

impl PredictionRecord {
    pub fn new(id: &str, family: ShapeFamily, c: usize, flat: &[f64]) -> Self {
        Self {
            id: id.to_string(),
            family,
            c,
            values: flat.chunks(c).map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(line)
            .map_err(|e| CliError::usage(format!("{}: line {}: {e}", path.display(), k + 1)))?;
        if rec.values.iter().any(|r| r.len() != rec.c) {
            return Err(CliError::usage(format!(
                "{}: line {}: rows of '{}' do not all have {} values",
                path.display(),
                k + 1,
                rec.id,
                rec.c
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Legacy ASCII unstructured grid of vertex cells with `c` point scalars
/// named `field_1..field_c`.
pub fn vtk_point_cloud(title: &str, points: &[Vec3], values: &[f64], c: usize) -> String {
    let n = points.len();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.replace(['\n', '\r'], " "));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for p in points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "CELLS {n} {}", 2 * n);
    for i in 0..n {
        let _ = writeln!(s, "1 {i}");
    }
    let _ = writeln!(s, "CELL_TYPES {n}");
    for _ in 0..n {
        let _ = writeln!(s, "1");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    for j in 0..c {
        let _ = writeln!(s, "SCALARS field_{} double 1", j + 1);
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for row in values.chunks(c) {
            let _ = writeln!(s, "{}", row[j]);
        }
    }
    s
}
