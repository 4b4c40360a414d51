//! JSON Lines case files plus a small manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CaseRecord, Dataset, NormalizationStats};
use crate::error::{Error, Result};
use crate::geometry::{DesignParams, ShapeFamily, Vec3};

pub const CASES_FILE: &str = "cases.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub family: ShapeFamily,
    pub c: usize,
    pub case_count: usize,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<NormalizationStats>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseLine {
    id: String,
    family: ShapeFamily,
    params: BTreeMap<String, f64>,
    points: Vec<[f64; 3]>,
    sdf: Vec<f64>,
    fields: Vec<Vec<f64>>,
}

impl From<&CaseRecord> for CaseLine {
    fn from(c: &CaseRecord) -> Self {
        CaseLine {
            id: c.id.clone(),
            family: c.params.family(),
            params: c.params.named().map(|(n, v)| (n.to_string(), v)).collect(),
            points: c.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            sdf: c.sdf.clone(),
            fields: c.fields.chunks_exact(c.c).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl CaseLine {
    fn into_record(self) -> std::result::Result<CaseRecord, String> {
        let named: Vec<(&str, f64)> = self.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let params = DesignParams::from_named(self.family, &named).map_err(|e| e.to_string())?;
        let n = self.points.len();
        if self.sdf.len() != n || self.fields.len() != n {
            return Err(format!(
                "array lengths disagree: {n} points, {} sdf, {} field rows",
                self.sdf.len(),
                self.fields.len()
            ));
        }
        let c = self.fields.first().map_or(0, Vec::len);
        if let Some(k) = self.fields.iter().position(|r| r.len() != c) {
            return Err(format!("field row {k} has {} components, expected {c}", self.fields[k].len()));
        }
        CaseRecord::new(
            self.id,
            params,
            self.points.into_iter().map(Vec3::from).collect(),
            self.sdf,
            self.fields.into_iter().flatten().collect(),
            c,
        )
        .map_err(|e| e.to_string())
    }
}

/// Writes `path/cases.jsonl` and `path/manifest.json`, creating `path`.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    let cases_path = path.join(CASES_FILE);
    let file = fs::File::create(&cases_path).map_err(|e| Error::io(&cases_path, e))?;
    let mut w = BufWriter::new(file);
    for case in &ds.cases {
        serde_json::to_writer(&mut w, &CaseLine::from(case))?;
        w.write_all(b"\n").map_err(|e| Error::io(&cases_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&cases_path, e))?;

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        family: ds.family,
        c: ds.c,
        case_count: ds.len(),
        seed: ds.seed,
        generator: ds.provenance.clone(),
        stats: ds.stats.clone(),
    };
    let manifest_path = path.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest_path = path.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.clone(),
        record: 0,
        message: e.to_string(),
    })?;

    let cases_path = path.join(CASES_FILE);
    let file = fs::File::open(&cases_path).map_err(|e| Error::io(&cases_path, e))?;
    let parse_err = |record: usize, message: String| Error::Parse {
        path: cases_path.clone(),
        record,
        message,
    };
    let mut cases = Vec::with_capacity(manifest.case_count);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&cases_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str::<CaseLine>(&line)
            .map_err(|e| e.to_string())
            .and_then(CaseLine::into_record)
            .map_err(|m| parse_err(i + 1, m))?;
        if rec.params.family() != manifest.family || rec.c != manifest.c {
            return Err(parse_err(
                i + 1,
                format!(
                    "case '{}' is {} with c = {}, manifest says {} with c = {}",
                    rec.id,
                    rec.params.family(),
                    rec.c,
                    manifest.family,
                    manifest.c
                ),
            ));
        }
        cases.push(rec);
    }
    if cases.len() != manifest.case_count {
        return Err(parse_err(
            cases.len(),
            format!("manifest lists {} cases, file holds {}", manifest.case_count, cases.len()),
        ));
    }
    let mut ds = Dataset::new(manifest.family, manifest.c, cases)?;
    ds.seed = manifest.seed;
    ds.provenance = manifest.generator;
    ds.stats = manifest.stats;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, GenConfig};

    fn sample() -> Dataset {
        generate_dataset(&GenConfig {
            family: ShapeFamily::CuboidWithVoid,
            count: 4,
            min_points: 10,
            max_points: 30,
            c: 4,
            seed: 5,
        })
        .unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let ds = sample();
        save_dataset(&ds, &a).unwrap();
        let back = load_dataset(&a).unwrap();
        assert_eq!(back, ds);
        save_dataset(&back, &b).unwrap();
        for f in [CASES_FILE, MANIFEST_FILE] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        }
    }

    #[test]
    fn mismatched_lengths_report_the_record() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample();
        save_dataset(&ds, dir.path()).unwrap();
        let p = dir.path().join(CASES_FILE);
        let mut lines: Vec<String> = fs::read_to_string(&p).unwrap().lines().map(String::from).collect();
        let mut v: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
        v["sdf"].as_array_mut().unwrap().pop();
        lines[2] = v.to_string();
        fs::write(&p, lines.join("\n") + "\n").unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Parse { record, message, .. }) => {
                assert_eq!(record, 3);
                assert!(message.contains("disagree"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn garbage_line_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&sample(), dir.path()).unwrap();
        let p = dir.path().join(CASES_FILE);
        let mut text = fs::read_to_string(&p).unwrap();
        text.insert_str(0, "{not json}\n");
        fs::write(&p, text).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Parse { record: 1, .. })));
    }
}
