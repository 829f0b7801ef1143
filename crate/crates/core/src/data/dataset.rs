//! Tabular datasets: loading, ordering and canonical CSV output.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::record::{clamp_level, extract_features, MonsterRecord, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::labels::LabelSpace;
use crate::matrix::Matrix;

/// Metadata columns that precede the features in CSV files.
pub const META_COLUMNS: [&str; 5] = ["id", "name", "date", "source", "level"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(DataFormat::Csv),
            "json" => Some(DataFormat::Json),
            _ => None,
        }
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "json" => Ok(DataFormat::Json),
            other => Err(Error::invalid(format!("unknown data format `{other}`"))),
        }
    }
}

/// One labelled row with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub name: String,
    pub date: NaiveDate,
    pub source: String,
    pub features: Vec<f64>,
    pub level: i32,
}

/// Rows sorted by `(date, id)`, all sharing one feature layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    rows: Vec<Sample>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, mut rows: Vec<Sample>) -> Result<Self> {
        let d = feature_names.len();
        let mut seen = HashSet::with_capacity(rows.len());
        for r in &rows {
            if r.features.len() != d {
                return Err(Error::Ingest {
                    location: format!("row `{}`", r.id),
                    reason: format!("{} features, expected {d}", r.features.len()),
                });
            }
            if let Some(j) = r.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::Ingest {
                    location: format!("row `{}`, field {}", r.id, feature_names[j]),
                    reason: "non-finite value".into(),
                });
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        rows.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
        Ok(Self {
            feature_names,
            rows,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Sample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn features(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.rows.len() * self.n_features());
        for r in &self.rows {
            data.extend_from_slice(&r.features);
        }
        Matrix::new(self.rows.len(), self.n_features(), data).expect("rows validated")
    }

    pub fn levels(&self) -> Vec<i32> {
        self.rows.iter().map(|r| r.level).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.rows.iter().map(|r| r.date).collect()
    }

    /// Contiguous label space spanning the observed levels.
    pub fn level_space(&self) -> Result<LabelSpace> {
        let lo = self.rows.iter().map(|r| r.level).min();
        let hi = self.rows.iter().map(|r| r.level).max();
        match (lo, hi) {
            (Some(lo), Some(hi)) if hi > lo => LabelSpace::range(lo, hi),
            _ => Err(Error::invalid("dataset needs at least two distinct levels")),
        }
    }

    /// Rows at the given indices (the result is re-sorted by `(date, id)`).
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut rows: Vec<Sample> = idx.iter().map(|&i| self.rows[i].clone()).collect();
        rows.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
        Dataset {
            feature_names: self.feature_names.clone(),
            rows,
        }
    }

    /// Same rows with features replaced; used by normalization.
    pub(crate) fn with_features(&self, features: &Matrix) -> Dataset {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| Sample {
                features: features.row(i).to_vec(),
                ..r.clone()
            })
            .collect();
        Dataset {
            feature_names: self.feature_names.clone(),
            rows,
        }
    }

    /// Builds a dataset from raw stat blocks using the canonical features.
    pub fn from_records(records: &[MonsterRecord]) -> Result<Self> {
        let mut rows = Vec::with_capacity(records.len());
        for r in records {
            let fv = extract_features(r)?;
            rows.push(Sample {
                id: r.id.clone(),
                name: r.name.clone(),
                date: r.publication_date,
                source: r.source_book.clone(),
                features: fv.values.to_vec(),
                level: fv.level,
            });
        }
        Dataset::new(canonical_feature_names(), rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<&str> = META_COLUMNS
            .iter()
            .copied()
            .chain(self.feature_names.iter().map(String::as_str))
            .collect();
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.id.clone(),
                r.name.clone(),
                r.date.format("%Y-%m-%d").to_string(),
                r.source.clone(),
                r.level.to_string(),
            ];
            rec.extend(r.features.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Counts per level, ascending.
    pub fn level_histogram(&self) -> Vec<(i32, usize)> {
        let mut h = std::collections::BTreeMap::new();
        for r in &self.rows {
            *h.entry(r.level).or_insert(0usize) += 1;
        }
        h.into_iter().collect()
    }
}

pub fn canonical_feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        DataFormat::Csv => read_csv(file),
        DataFormat::Json => read_json(file),
    }
}

/// Reads the flat CSV layout: the metadata columns plus one column per
/// feature. Every column that is not metadata is a feature, kept in header order.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut meta_pos = [usize::MAX; META_COLUMNS.len()];
    let mut feature_cols = Vec::new();
    let mut seen = HashSet::new();
    for (i, h) in headers.iter().enumerate() {
        if !seen.insert(h.to_string()) {
            return Err(Error::Ingest {
                location: format!("header column {}", i + 1),
                reason: format!("duplicate column `{h}`"),
            });
        }
        match META_COLUMNS.iter().position(|m| *m == h) {
            Some(m) => meta_pos[m] = i,
            None => feature_cols.push((i, h.to_string())),
        }
    }
    if let Some(m) = meta_pos.iter().position(|&p| p == usize::MAX) {
        return Err(Error::Ingest {
            location: "header".into(),
            reason: format!("missing column `{}`", META_COLUMNS[m]),
        });
    }
    if feature_cols.is_empty() {
        return Err(Error::Ingest {
            location: "header".into(),
            reason: "no feature columns".into(),
        });
    }
    let col_name = |i: usize| headers.get(i).unwrap_or("?").to_string();
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(n as u64 + 2);
        let loc = |col: usize| format!("line {line}, column `{}`", col_name(col));
        let field = |col: usize| rec.get(col).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(meta_pos[2]), "%Y-%m-%d").map_err(|e| {
            Error::Ingest {
                location: loc(meta_pos[2]),
                reason: format!("invalid ISO-8601 date `{}`: {e}", field(meta_pos[2])),
            }
        })?;
        let raw_level: i32 = field(meta_pos[4]).parse().map_err(|_| Error::Ingest {
            location: loc(meta_pos[4]),
            reason: format!("invalid integer `{}`", field(meta_pos[4])),
        })?;
        let level = clamp_level(raw_level).map_err(|e| Error::Ingest {
            location: loc(meta_pos[4]),
            reason: e.to_string(),
        })?;
        let mut features = Vec::with_capacity(feature_cols.len());
        for (col, _) in &feature_cols {
            let v: f64 = field(*col).parse().map_err(|_| Error::Ingest {
                location: loc(*col),
                reason: format!("invalid number `{}`", field(*col)),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest {
                    location: loc(*col),
                    reason: "non-finite value".into(),
                });
            }
            features.push(v);
        }
        let id = field(meta_pos[0]).to_string();
        if id.is_empty() {
            return Err(Error::Ingest {
                location: loc(meta_pos[0]),
                reason: "empty id".into(),
            });
        }
        rows.push(Sample {
            id,
            name: field(meta_pos[1]).to_string(),
            date,
            source: field(meta_pos[3]).to_string(),
            features,
            level,
        });
    }
    Dataset::new(feature_cols.into_iter().map(|(_, n)| n).collect(), rows)
}

/// Reads a JSON array of stat blocks and extracts the canonical features.
pub fn read_json<R: Read>(reader: R) -> Result<Dataset> {
    let values: Vec<serde_json::Value> = serde_json::from_reader(reader)?;
    let mut records = Vec::with_capacity(values.len());
    for (i, v) in values.into_iter().enumerate() {
        let id = v
            .get("id")
            .and_then(|x| x.as_str())
            .map(|s| format!(" (id `{s}`)"))
            .unwrap_or_default();
        let rec: MonsterRecord = serde_json::from_value(v).map_err(|e| Error::Ingest {
            location: format!("record {i}{id}"),
            reason: e.to_string(),
        })?;
        records.push(rec);
    }
    Dataset::from_records(&records)
}
