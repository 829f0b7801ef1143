//! Human-inspired baseline: archetype assignment plus per-archetype KNN.

pub mod skills;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use skills::{classify_bucket, Bucket, SkillRow, SkillTable};

use crate::data::NormalizationParams;
use crate::error::{Error, Result};
use crate::learners::knn::{fit_knn, KnnModel, Weighting};
use crate::matrix::Matrix;

pub const DEFAULT_K: usize = 5;
pub const GENERALIST_MARGIN: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    MeleeBruiser,
    RangedStriker,
    Caster,
    Defender,
    Generalist,
}

impl Archetype {
    /// Families in tie-breaking order.
    pub const FAMILIES: [Archetype; 4] = [
        Archetype::MeleeBruiser,
        Archetype::RangedStriker,
        Archetype::Caster,
        Archetype::Defender,
    ];

    fn columns(self) -> &'static [&'static str] {
        match self {
            Archetype::MeleeBruiser => &["melee_max_bonus", "melee_avg_damage"],
            Archetype::RangedStriker => &["ranged_max_bonus", "ranged_avg_damage"],
            Archetype::Caster => &["spell_dc", "spell_attack", "total_spells"],
            Archetype::Defender => &["ac", "hp", "fortitude", "reflex", "will"],
            Archetype::Generalist => &[],
        }
    }
}

const SPELL_COLUMNS: [&str; 9] = [
    "spells_level_1",
    "spells_level_2",
    "spells_level_3",
    "spells_level_4",
    "spells_level_5",
    "spells_level_6",
    "spells_level_7",
    "spells_level_8",
    "spells_level_9",
];

/// Per-family column indices and training mean/std of each family statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeStats {
    families: Vec<FamilyStats>,
    spell_columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FamilyStats {
    archetype: Archetype,
    /// `None` marks the derived total spell count.
    columns: Vec<Option<usize>>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl ArchetypeStats {
    /// Families whose columns are absent from `feature_names` are skipped.
    pub fn fit(x: &Matrix, feature_names: &[String]) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::empty("no rows for archetype statistics"));
        }
        let find = |c: &str| feature_names.iter().position(|n| n == c);
        let spell_columns: Vec<usize> = SPELL_COLUMNS.iter().filter_map(|c| find(c)).collect();
        let mut families = Vec::new();
        for a in Archetype::FAMILIES {
            let mut columns = Vec::new();
            for &c in a.columns() {
                if c == "total_spells" {
                    if !spell_columns.is_empty() {
                        columns.push(None);
                    }
                } else if let Some(i) = find(c) {
                    columns.push(Some(i));
                }
            }
            if columns.is_empty() {
                continue;
            }
            let mut fam = FamilyStats {
                archetype: a,
                columns,
                mean: Vec::new(),
                std: Vec::new(),
            };
            let values: Vec<Vec<f64>> = x
                .iter_rows()
                .map(|r| fam.raw(r, &spell_columns))
                .collect();
            let vm = Matrix::from_rows(&values)?;
            let norm = NormalizationParams::fit(&vm)?;
            fam.mean = norm.mean;
            fam.std = norm.std;
            families.push(fam);
        }
        if families.is_empty() {
            log::warn!("no archetype columns found; every row is a generalist");
        }
        Ok(ArchetypeStats {
            families,
            spell_columns,
        })
    }

    /// Mean z-score of each available family, in family order.
    pub fn family_scores(&self, row: &[f64]) -> Vec<(Archetype, f64)> {
        self.families
            .iter()
            .map(|f| {
                let raw = f.raw(row, &self.spell_columns);
                let z: f64 = raw
                    .iter()
                    .zip(&f.mean)
                    .zip(&f.std)
                    .map(|((v, m), s)| (v - m) / s)
                    .sum();
                (f.archetype, z / raw.len() as f64)
            })
            .collect()
    }
}

impl FamilyStats {
    fn raw(&self, row: &[f64], spells: &[usize]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| match c {
                Some(i) => row[*i],
                None => spells.iter().map(|&i| row[i]).sum(),
            })
            .collect()
    }
}

/// Family with the highest mean z-score; generalist when that score is
/// below the margin. Ties keep the earlier family.
pub fn assign_archetype(row: &[f64], stats: &ArchetypeStats) -> Archetype {
    let mut best: Option<(Archetype, f64)> = None;
    for (a, s) in stats.family_scores(row) {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((a, s));
        }
    }
    match best {
        Some((a, s)) if s >= GENERALIST_MARGIN => a,
        _ => Archetype::Generalist,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub stats: ArchetypeStats,
    pub norm: NormalizationParams,
    pub buckets: BTreeMap<Archetype, KnnModel>,
    pub fallback: KnnModel,
    pub k: usize,
}

pub fn baseline_fit(x: &Matrix, feature_names: &[String], y: &[f64], k: usize) -> Result<BaselineModel> {
    if feature_names.len() != x.cols() {
        return Err(Error::invalid("feature names do not match matrix width"));
    }
    if x.rows() < k {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {} training rows",
            x.rows()
        )));
    }
    let stats = ArchetypeStats::fit(x, feature_names)?;
    let norm = NormalizationParams::fit(x)?;
    let xn = norm.transform(x)?;
    let mut groups: BTreeMap<Archetype, Vec<usize>> = BTreeMap::new();
    for (i, r) in x.iter_rows().enumerate() {
        groups.entry(assign_archetype(r, &stats)).or_default().push(i);
    }
    let mut buckets = BTreeMap::new();
    for (a, idx) in groups {
        if idx.len() >= k {
            let yy: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            buckets.insert(a, fit_knn(&xn.select_rows(&idx), &yy, k, Weighting::InverseDistance)?);
        }
    }
    let fallback = fit_knn(&xn, y, k, Weighting::InverseDistance)?;
    Ok(BaselineModel {
        stats,
        norm,
        buckets,
        fallback,
        k,
    })
}

impl BaselineModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let xn = self.norm.transform(x)?;
        Ok(x
            .iter_rows()
            .zip(xn.iter_rows())
            .map(|(raw, z)| {
                let a = assign_archetype(raw, &self.stats);
                self.buckets.get(&a).unwrap_or(&self.fallback).predict_row(z)
            })
            .collect())
    }
}
