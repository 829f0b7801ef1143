//! The rulebook skill table and value bucketing against it.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/skills.csv");
pub const TABLE_MIN_LEVEL: i32 = -1;
pub const TABLE_MAX_LEVEL: i32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillRow {
    pub extreme: i32,
    pub high: i32,
    pub moderate: i32,
    pub low_hi: i32,
    pub low_lo: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillTable {
    rows: BTreeMap<i32, SkillRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Terrible,
    Low,
    Moderate,
    High,
    Extreme,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    level: i32,
    extreme: String,
    high: String,
    moderate: String,
    low: String,
}

fn parse_signed(s: &str, level: i32) -> Result<i32> {
    s.trim()
        .trim_start_matches('+')
        .parse()
        .map_err(|_| Error::Ingest {
            location: format!("skill table level {level}"),
            reason: format!("bad value `{s}`"),
        })
}

impl SkillTable {
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED.as_bytes()).expect("bundled skill table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for rec in csv::Reader::from_reader(reader).deserialize::<RawRow>() {
            let r = rec?;
            let (hi, lo) = r.low.split_once("to").ok_or_else(|| Error::Ingest {
                location: format!("skill table level {}", r.level),
                reason: format!("low range `{}` is not `A to B`", r.low),
            })?;
            let row = SkillRow {
                extreme: parse_signed(&r.extreme, r.level)?,
                high: parse_signed(&r.high, r.level)?,
                moderate: parse_signed(&r.moderate, r.level)?,
                low_hi: parse_signed(hi, r.level)?,
                low_lo: parse_signed(lo, r.level)?,
            };
            if rows.insert(r.level, row).is_some() {
                return Err(Error::Ingest {
                    location: format!("skill table level {}", r.level),
                    reason: "duplicate level".into(),
                });
            }
        }
        let table = SkillTable { rows };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        let want: Vec<i32> = (TABLE_MIN_LEVEL..=TABLE_MAX_LEVEL).collect();
        if self.rows.keys().copied().collect::<Vec<_>>() != want {
            return Err(Error::Ingest {
                location: "skill table".into(),
                reason: format!("levels must be exactly {TABLE_MIN_LEVEL}..={TABLE_MAX_LEVEL}"),
            });
        }
        let mut prev: Option<&SkillRow> = None;
        for (level, r) in &self.rows {
            let bad = |reason: &str| Error::Ingest {
                location: format!("skill table level {level}"),
                reason: reason.into(),
            };
            if !(r.extreme > r.high && r.high > r.moderate && r.moderate > r.low_hi && r.low_hi >= r.low_lo) {
                return Err(bad("columns must satisfy extreme > high > moderate > low"));
            }
            if let Some(p) = prev {
                if r.extreme < p.extreme
                    || r.high < p.high
                    || r.moderate < p.moderate
                    || r.low_hi < p.low_hi
                    || r.low_lo < p.low_lo
                {
                    return Err(bad("values decrease from the previous level"));
                }
            }
            prev = Some(r);
        }
        Ok(())
    }

    /// Row for `level`; levels above the table use its last row.
    pub fn row(&self, level: i32) -> Result<&SkillRow> {
        if level < TABLE_MIN_LEVEL {
            return Err(Error::Domain {
                value: level as i64,
                domain: format!("skill table levels >= {TABLE_MIN_LEVEL}"),
            });
        }
        Ok(&self.rows[&level.min(TABLE_MAX_LEVEL)])
    }

    pub fn levels(&self) -> impl Iterator<Item = (i32, &SkillRow)> {
        self.rows.iter().map(|(k, v)| (*k, v))
    }
}

/// Nearest category for `value` at `level`; ties go to the higher category.
pub fn classify_bucket(value: i32, level: i32, table: &SkillTable) -> Result<Bucket> {
    let r = table.row(level)?;
    if value < r.low_lo {
        return Ok(Bucket::Terrible);
    }
    let low_dist = if value > r.low_hi { value - r.low_hi } else { 0 };
    let candidates = [
        (Bucket::Extreme, (value - r.extreme).abs()),
        (Bucket::High, (value - r.high).abs()),
        (Bucket::Moderate, (value - r.moderate).abs()),
        (Bucket::Low, low_dist),
    ];
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.1 < best.1 {
            best = *c;
        }
    }
    Ok(best.0)
}
