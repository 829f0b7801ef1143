//! Mapping continuous regression outputs onto ordered integer levels.
//!
//! A [`ThresholdMap`] stores one fractional offset `r_i` per boundary between
//! level `i` and `i + 1`; the cut sits at `t_i = i + r_i`. A raw value `x`
//! with integer part `i` becomes `i` when `x < t_i` and `i + 1` otherwise, so
//! each interval is half-open `[t_{i-1}, t_i)`.
//! Values outside the level range clamp to the extreme levels.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::labels::LabelSpace;

fn contiguous_range(space: &LabelSpace) -> Result<(i32, i32)> {
    if !space.is_contiguous() {
        return Err(Error::invalid(
            "rounding needs a contiguous integer level space",
        ));
    }
    Ok((space.min(), space.max()))
}

/// Per-boundary fractional offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdMap {
    min_level: i32,
    offsets: Vec<f64>,
}

impl ThresholdMap {
    /// `offsets[b]` is the offset of the boundary between `min_level + b` and
    /// `min_level + b + 1`. Offsets must lie in `[0, 1)`; `0` only arises from
    /// grids built in figure mode.
    pub fn new(min_level: i32, offsets: Vec<f64>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::invalid("threshold map needs at least one boundary"));
        }
        if let Some(r) = offsets.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::invalid(format!("offset {r} outside [0, 1)")));
        }
        Ok(Self { min_level, offsets })
    }

    pub fn constant(space: &LabelSpace, offset: f64) -> Result<Self> {
        let (lo, hi) = contiguous_range(space)?;
        Self::new(lo, vec![offset; (hi - lo) as usize])
    }

    pub fn min_level(&self) -> i32 {
        self.min_level
    }

    pub fn max_level(&self) -> i32 {
        self.min_level + self.offsets.len() as i32
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Offset of the boundary whose lower level is `level`.
    pub fn offset(&self, level: i32) -> Option<f64> {
        let b = level.checked_sub(self.min_level)?;
        usize::try_from(b).ok().and_then(|b| self.offsets.get(b).copied())
    }

    /// Absolute cut position `t_i = i + r_i`.
    pub fn threshold(&self, level: i32) -> Option<f64> {
        self.offset(level).map(|r| f64::from(level) + r)
    }

    pub fn apply(&self, x: f64) -> i32 {
        match locate(x, self.min_level, self.max_level()) {
            Position::Below => self.min_level,
            Position::Above => self.max_level(),
            Position::Bucket(b) => round_in_bucket(x, self.min_level + b as i32, self.offsets[b]),
        }
    }

    pub fn apply_all(&self, raw: &[f64]) -> Vec<i32> {
        raw.iter().map(|&x| self.apply(x)).collect()
    }

    fn check_space(&self, space: &LabelSpace) -> Result<()> {
        let (lo, hi) = contiguous_range(space)?;
        if lo != self.min_level || hi != self.max_level() {
            return Err(Error::invalid(format!(
                "threshold map covers {}..={}, level space is {lo}..={hi}",
                self.min_level,
                self.max_level()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Position {
    Below,
    Above,
    /// Index of the boundary whose unit interval holds the value.
    Bucket(usize),
}

fn locate(x: f64, min: i32, max: i32) -> Position {
    if x.is_nan() {
        return Position::Below;
    }
    let fl = x.floor();
    if fl < f64::from(min) {
        Position::Below
    } else if fl >= f64::from(max) {
        Position::Above
    } else {
        Position::Bucket((fl as i64 - i64::from(min)) as usize)
    }
}

/// `x` lies in `[lower, lower + 1)`; it rounds down iff `x < lower + offset`.
#[inline]
fn round_in_bucket(x: f64, lower: i32, offset: f64) -> i32 {
    if x < f64::from(lower) + offset {
        lower
    } else {
        lower + 1
    }
}

impl Serialize for ThresholdMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        struct Offsets<'a>(&'a ThresholdMap);
        impl Serialize for Offsets<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(Some(self.0.offsets.len()))?;
                for (b, r) in self.0.offsets.iter().enumerate() {
                    m.serialize_entry(&(self.0.min_level + b as i32).to_string(), r)?;
                }
                m.end()
            }
        }
        let mut m = s.serialize_map(Some(1))?;
        m.serialize_entry("offsets", &Offsets(self))?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for ThresholdMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            offsets: HashMap<String, f64>,
        }
        let raw = Raw::deserialize(d)?;
        let mut entries = Vec::with_capacity(raw.offsets.len());
        for (k, v) in raw.offsets {
            let level: i32 = k
                .parse()
                .map_err(|_| D::Error::custom(format!("boundary key `{k}` is not an integer")))?;
            entries.push((level, v));
        }
        entries.sort_by_key(|e| e.0);
        let min = entries
            .first()
            .map(|e| e.0)
            .ok_or_else(|| D::Error::custom("empty offsets"))?;
        for (i, (level, _)) in entries.iter().enumerate() {
            if *level != min + i as i32 {
                return Err(D::Error::custom(format!("missing boundary {}", min + i as i32)));
            }
        }
        ThresholdMap::new(min, entries.into_iter().map(|e| e.1).collect())
            .map_err(D::Error::custom)
    }
}

/// Nearest level with every cut at 0.5 (halves round up), clamped to the space.
pub fn round_half(raw: f64, space: &LabelSpace) -> Result<i32> {
    let (lo, hi) = contiguous_range(space)?;
    Ok(((raw + 0.5).floor().clamp(f64::from(lo), f64::from(hi))) as i32)
}

pub fn apply_thresholds(raw: &[f64], map: &ThresholdMap, space: &LabelSpace) -> Result<Vec<i32>> {
    map.check_space(space)?;
    Ok(map.apply_all(raw))
}

/// Sorted, distinct candidate offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    offsets: Vec<f64>,
}

impl ThresholdGrid {
    /// Offsets must lie strictly inside `(0, 1)`.
    pub fn new(mut offsets: Vec<f64>) -> Result<Self> {
        if let Some(r) = offsets.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::invalid(format!("grid offset {r} outside (0, 1)")));
        }
        offsets.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        offsets.dedup();
        Ok(Self { offsets })
    }

    /// Like [`ThresholdGrid::new`] but also admits `0.0`.
    pub fn with_zero(mut offsets: Vec<f64>) -> Result<Self> {
        if let Some(r) = offsets.iter().find(|r| !(**r >= 0.0 && **r < 1.0)) {
            return Err(Error::invalid(format!("grid offset {r} outside [0, 1)")));
        }
        offsets.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        offsets.dedup();
        Ok(Self { offsets })
    }

    /// 0.05, 0.10, ..., 0.95.
    pub fn r1() -> Self {
        Self {
            offsets: (1..=19).map(|k| f64::from(k) / 20.0).collect(),
        }
    }

    /// 0.25, 0.30, ..., 0.75.
    pub fn r2() -> Self {
        Self {
            offsets: (5..=15).map(|k| f64::from(k) / 20.0).collect(),
        }
    }

    /// 0.0, 0.2, 0.4, 0.6, 0.8: the five-offset grid of the rounding-graph figure.
    pub fn figure() -> Self {
        Self {
            offsets: (0..5).map(|k| f64::from(k) / 5.0).collect(),
        }
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Index of the offset closest to 0.5 (lower offset on ties).
    fn nearest_half(&self) -> usize {
        let mut best = 0;
        for (i, r) in self.offsets.iter().enumerate() {
            if (r - 0.5).abs() < (self.offsets[best] - 0.5).abs() {
                best = i;
            }
        }
        best
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.offsets.is_empty() {
            return Err(Error::invalid("threshold grid is empty"));
        }
        Ok(())
    }
}

/// Named grid presets, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Preset(GridPreset),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridPreset {
    R1,
    R2,
    #[serde(rename = "figure")]
    Figure,
}

impl GridPreset {
    pub const ALL: [&'static str; 3] = ["R1", "R2", "figure"];
}

impl FromStr for GridPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R1" | "r1" => Ok(GridPreset::R1),
            "R2" | "r2" => Ok(GridPreset::R2),
            "figure" => Ok(GridPreset::Figure),
            other => Err(Error::invalid(format!(
                "unknown grid preset `{other}` (expected one of {})",
                GridPreset::ALL.join(", ")
            ))),
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<ThresholdGrid> {
        match self {
            GridSpec::Preset(GridPreset::R1) => Ok(ThresholdGrid::r1()),
            GridSpec::Preset(GridPreset::R2) => Ok(ThresholdGrid::r2()),
            GridSpec::Preset(GridPreset::Figure) => Ok(ThresholdGrid::figure()),
            GridSpec::Values(v) => ThresholdGrid::new(v.clone()),
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Preset(GridPreset::R1) => f.write_str("R1"),
            GridSpec::Preset(GridPreset::R2) => f.write_str("R2"),
            GridSpec::Preset(GridPreset::Figure) => f.write_str("figure"),
            GridSpec::Values(v) => write!(f, "custom{}", v.len()),
        }
    }
}

/// Objective minimized on the tuning pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingLoss {
    #[default]
    Mae,
    MacroMae,
}

/// Incrementally maintained per-class absolute error sums.
#[derive(Debug, Clone)]
struct LossState {
    loss: RoundingLoss,
    n: usize,
    class_count: Vec<i64>,
    class_abs: Vec<i64>,
}

impl LossState {
    fn new(loss: RoundingLoss, y_rank: &[usize], k: usize) -> Self {
        let mut class_count = vec![0; k];
        for &c in y_rank {
            class_count[c] += 1;
        }
        Self {
            loss,
            n: y_rank.len(),
            class_count,
            class_abs: vec![0; k],
        }
    }

    fn value(&self) -> f64 {
        match self.loss {
            RoundingLoss::Mae => self.class_abs.iter().sum::<i64>() as f64 / self.n as f64,
            RoundingLoss::MacroMae => {
                let mut sum = 0.0;
                let mut classes = 0usize;
                for (c, a) in self.class_count.iter().zip(&self.class_abs) {
                    if *c > 0 {
                        sum += *a as f64 / *c as f64;
                        classes += 1;
                    }
                }
                sum / classes as f64
            }
        }
    }
}

/// Tuning pairs bucketed by boundary.
struct TuningSet {
    min: i32,
    n_boundaries: usize,
    y: Vec<i32>,
    y_rank: Vec<usize>,
    /// Observations outside every bucket with their fixed prediction.
    fixed: Vec<(usize, i32)>,
    /// Per boundary: (observation index, raw value).
    buckets: Vec<Vec<(usize, f64)>>,
}

impl TuningSet {
    fn new(raw: &[f64], y: &[i32], space: &LabelSpace) -> Result<Self> {
        let (lo, hi) = contiguous_range(space)?;
        if raw.is_empty() {
            return Err(Error::empty("no tuning pairs"));
        }
        if raw.len() != y.len() {
            return Err(Error::invalid("raw predictions and labels differ in length"));
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("raw prediction {i} is not finite")));
        }
        let y_rank = space.ranks(y)?;
        let n_boundaries = (hi - lo) as usize;
        let mut buckets = vec![Vec::new(); n_boundaries];
        let mut fixed = Vec::new();
        for (j, &x) in raw.iter().enumerate() {
            match locate(x, lo, hi) {
                Position::Below => fixed.push((j, lo)),
                Position::Above => fixed.push((j, hi)),
                Position::Bucket(b) => buckets[b].push((j, x)),
            }
        }
        Ok(Self {
            min: lo,
            n_boundaries,
            y: y.to_vec(),
            y_rank,
            fixed,
            buckets,
        })
    }

    fn k(&self) -> usize {
        self.n_boundaries + 1
    }

    fn state_for(&self, loss: RoundingLoss, offsets: &[f64]) -> LossState {
        let mut st = LossState::new(loss, &self.y_rank, self.k());
        for &(j, p) in &self.fixed {
            st.class_abs[self.y_rank[j]] += i64::from((self.y[j] - p).abs());
        }
        for (b, &r) in offsets.iter().enumerate() {
            self.add_bucket(&mut st, b, r, 1);
        }
        st
    }

    fn add_bucket(&self, st: &mut LossState, b: usize, offset: f64, sign: i64) {
        let lower = self.min + b as i32;
        for &(j, x) in &self.buckets[b] {
            let p = round_in_bucket(x, lower, offset);
            st.class_abs[self.y_rank[j]] += sign * i64::from((self.y[j] - p).abs());
        }
    }

    fn loss_of(&self, loss: RoundingLoss, offsets: &[f64]) -> f64 {
        self.state_for(loss, offsets).value()
    }
}

/// Single offset shared by every boundary, chosen from the grid.
/// Ties go to the smallest offset.
pub fn fit_global_threshold(
    raw: &[f64],
    y: &[i32],
    space: &LabelSpace,
    grid: &ThresholdGrid,
    loss: RoundingLoss,
) -> Result<ThresholdMap> {
    grid.require_nonempty()?;
    let ts = TuningSet::new(raw, y, space)?;
    let mut best: Option<(f64, f64)> = None;
    for &r in grid.offsets() {
        let l = ts.loss_of(loss, &vec![r; ts.n_boundaries]);
        if best.is_none_or(|(bl, _)| l < bl) {
            best = Some((l, r));
        }
    }
    let (_, r) = best.expect("grid is non-empty");
    ThresholdMap::new(ts.min, vec![r; ts.n_boundaries])
}

/// Per-boundary offsets by cyclic coordinate descent over the grid.
///
/// The first descent starts with every offset at the grid value nearest 0.5;
/// once it converges, further descents restart from seeded random grid
/// points until `budget` sweeps have been spent. The best map found is
/// returned (lexicographically smallest offsets among equal losses).
pub fn fit_per_level_search(
    raw: &[f64],
    y: &[i32],
    space: &LabelSpace,
    grid: &ThresholdGrid,
    loss: RoundingLoss,
    budget: usize,
    seed: u64,
) -> Result<ThresholdMap> {
    grid.require_nonempty()?;
    let ts = TuningSet::new(raw, y, space)?;
    let g = grid.offsets();
    let nb = ts.n_boundaries;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut current = vec![grid.nearest_half(); nb];
    let mut best_idx = current.clone();
    let mut best_loss = ts.loss_of(loss, &to_offsets(g, &current));
    let mut sweeps = 0;

    while sweeps < budget {
        let mut st = ts.state_for(loss, &to_offsets(g, &current));
        let mut cur_loss = st.value();
        let mut moved = false;
        for b in 0..nb {
            ts.add_bucket(&mut st, b, g[current[b]], -1);
            let mut choice = current[b];
            let mut choice_loss = cur_loss;
            for (gi, &r) in g.iter().enumerate() {
                ts.add_bucket(&mut st, b, r, 1);
                let l = st.value();
                ts.add_bucket(&mut st, b, r, -1);
                if l < choice_loss || (l == choice_loss && gi < choice) {
                    choice = gi;
                    choice_loss = l;
                }
            }
            ts.add_bucket(&mut st, b, g[choice], 1);
            if choice != current[b] {
                moved = true;
                current[b] = choice;
                cur_loss = choice_loss;
            }
        }
        sweeps += 1;
        if cur_loss < best_loss || (cur_loss == best_loss && current < best_idx) {
            best_loss = cur_loss;
            best_idx = current.clone();
        }
        if !moved {
            current = (0..nb).map(|_| rng.random_range(0..g.len())).collect();
        }
    }
    ThresholdMap::new(ts.min, to_offsets(g, &best_idx))
}

fn to_offsets(grid: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| grid[i]).collect()
}

/// Which arcs connect consecutive layers of the rounding graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcMode {
    /// Any offset may follow any offset.
    #[default]
    Free,
    /// The next offset must be strictly larger than the previous one.
    PaperMonotone,
}

/// Preference among equal-cost optimal paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Lexicographically smallest offset vector.
    #[default]
    Smallest,
    /// Offsets closest to 0.5 first.
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GraphOptions {
    #[serde(default)]
    pub mode: ArcMode,
    #[serde(default)]
    pub tie: TieBreak,
}

/// Result of the shortest-path threshold search.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFit {
    pub map: ThresholdMap,
    /// Total absolute deviation of the induced rounding on the tuning set.
    pub cost: i64,
    /// Costs of the arcs on the chosen path: source arc, inner arcs, sink arc.
    pub arc_costs: Vec<i64>,
}

/// Layered graph whose nodes are (boundary, grid offset) pairs.
struct RoundingGraph {
    /// `lower[b][g]`: cost of bucket-`b` observations below offset `g`,
    /// which round down to level `min + b`.
    lower: Vec<Vec<i64>>,
    /// `upper[b][g]`: cost of bucket-`b` observations at or above offset `g`,
    /// which round up to level `min + b + 1`.
    upper: Vec<Vec<i64>>,
    below: i64,
    above: i64,
}

impl RoundingGraph {
    fn build(ts: &TuningSet, grid: &[f64]) -> Self {
        let mut below = 0;
        let mut above = 0;
        for &(j, p) in &ts.fixed {
            let c = i64::from((ts.y[j] - p).abs());
            if p == ts.min {
                below += c;
            } else {
                above += c;
            }
        }
        let mut lower = Vec::with_capacity(ts.n_boundaries);
        let mut upper = Vec::with_capacity(ts.n_boundaries);
        for (b, bucket) in ts.buckets.iter().enumerate() {
            let lo_level = ts.min + b as i32;
            let mut lo_row = vec![0i64; grid.len()];
            let mut up_row = vec![0i64; grid.len()];
            for (gi, &r) in grid.iter().enumerate() {
                for &(j, x) in bucket {
                    if round_in_bucket(x, lo_level, r) == lo_level {
                        lo_row[gi] += i64::from((ts.y[j] - lo_level).abs());
                    } else {
                        up_row[gi] += i64::from((ts.y[j] - lo_level - 1).abs());
                    }
                }
            }
            lower.push(lo_row);
            upper.push(up_row);
        }
        Self {
            lower,
            upper,
            below,
            above,
        }
    }

    fn source_arc(&self, g: usize) -> i64 {
        self.below + self.lower[0][g]
    }

    fn inner_arc(&self, b: usize, g: usize, g_next: usize) -> i64 {
        self.upper[b][g] + self.lower[b + 1][g_next]
    }

    fn sink_arc(&self, g: usize) -> i64 {
        self.upper[self.upper.len() - 1][g] + self.above
    }
}

/// Minimum total absolute deviation thresholds via a shortest path through
/// the layered rounding graph.
pub fn fit_graph_thresholds(
    raw: &[f64],
    y: &[i32],
    space: &LabelSpace,
    grid: &ThresholdGrid,
    options: GraphOptions,
) -> Result<GraphFit> {
    grid.require_nonempty()?;
    let ts = TuningSet::new(raw, y, space)?;
    let g = grid.offsets();
    let nb = ts.n_boundaries;
    let ng = g.len();
    if options.mode == ArcMode::PaperMonotone && ng < nb {
        return Err(Error::Infeasible(format!(
            "monotone arcs need at least {nb} grid offsets, grid has {ng}"
        )));
    }
    let graph = RoundingGraph::build(&ts, g);
    let allowed = |a: usize, b: usize| match options.mode {
        ArcMode::Free => true,
        ArcMode::PaperMonotone => b > a,
    };

    // to_sink[b][g]: cheapest cost from node (b, g) to the sink, None if unreachable.
    let mut to_sink: Vec<Vec<Option<i64>>> = vec![vec![None; ng]; nb];
    for gi in 0..ng {
        to_sink[nb - 1][gi] = Some(graph.sink_arc(gi));
    }
    for b in (0..nb - 1).rev() {
        for gi in 0..ng {
            let mut best: Option<i64> = None;
            for gn in 0..ng {
                if !allowed(gi, gn) {
                    continue;
                }
                if let Some(rest) = to_sink[b + 1][gn] {
                    let c = graph.inner_arc(b, gi, gn) + rest;
                    if best.is_none_or(|v| c < v) {
                        best = Some(c);
                    }
                }
            }
            to_sink[b][gi] = best;
        }
    }

    let mut order: Vec<usize> = (0..ng).collect();
    if options.tie == TieBreak::Center {
        order.sort_by(|&a, &b| {
            let ka = ((g[a] - 0.5).abs(), g[a]);
            let kb = ((g[b] - 0.5).abs(), g[b]);
            ka.partial_cmp(&kb).expect("finite")
        });
    }

    let pick = |candidates: &mut dyn Iterator<Item = (usize, Option<i64>)>| {
        let cands: Vec<(usize, i64)> = candidates.filter_map(|(gi, c)| c.map(|c| (gi, c))).collect();
        let best = cands.iter().map(|c| c.1).min()?;
        order
            .iter()
            .find(|gi| cands.iter().any(|c| c.0 == **gi && c.1 == best))
            .map(|&gi| (gi, best))
    };

    let (first, total) = pick(&mut (0..ng).map(|gi| {
        (gi, to_sink[0][gi].map(|r| graph.source_arc(gi) + r))
    }))
    .ok_or_else(|| Error::Infeasible("no source-to-sink path".into()))?;

    let mut path = vec![first];
    let mut arc_costs = vec![graph.source_arc(first)];
    for b in 0..nb - 1 {
        let prev = path[b];
        let (next, _) = pick(&mut (0..ng).map(|gn| {
            let c = if allowed(prev, gn) {
                to_sink[b + 1][gn].map(|r| graph.inner_arc(b, prev, gn) + r)
            } else {
                None
            };
            (gn, c)
        }))
        .expect("an optimal successor exists on a reachable node");
        arc_costs.push(graph.inner_arc(b, prev, next));
        path.push(next);
    }
    arc_costs.push(graph.sink_arc(path[nb - 1]));
    debug_assert_eq!(arc_costs.iter().sum::<i64>(), total);

    Ok(GraphFit {
        map: ThresholdMap::new(ts.min, to_offsets(g, &path))?,
        cost: total,
        arc_costs,
    })
}

/// Sum of absolute deviations of a threshold map on tuning pairs.
pub fn total_abs_deviation(raw: &[f64], y: &[i32], map: &ThresholdMap) -> i64 {
    raw.iter()
        .zip(y)
        .map(|(&x, &t)| i64::from((map.apply(x) - t).abs()))
        .sum()
}

/// A rounding strategy as configured for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoundingStrategy {
    Half,
    Global {
        grid: GridSpec,
        #[serde(default)]
        loss: RoundingLoss,
    },
    PerLevel {
        grid: GridSpec,
        #[serde(default)]
        loss: RoundingLoss,
        #[serde(default = "default_budget")]
        budget: usize,
    },
    Graph {
        grid: GridSpec,
        #[serde(default)]
        mode: ArcMode,
        #[serde(default)]
        tie: TieBreak,
    },
}

fn default_budget() -> usize {
    50
}

impl RoundingStrategy {
    pub const NAMES: [&'static str; 4] = ["half", "global", "per_level", "graph"];

    /// Short label used in reports, e.g. `graph-R1`.
    pub fn label(&self) -> String {
        match self {
            RoundingStrategy::Half => "half".into(),
            RoundingStrategy::Global { grid, .. } => format!("global-{grid}"),
            RoundingStrategy::PerLevel { grid, .. } => format!("per_level-{grid}"),
            RoundingStrategy::Graph { grid, mode, .. } => match mode {
                ArcMode::Free => format!("graph-{grid}"),
                ArcMode::PaperMonotone => format!("graph_monotone-{grid}"),
            },
        }
    }

    /// Fits a threshold map on tuning pairs (usually training predictions).
    pub fn fit(&self, raw: &[f64], y: &[i32], space: &LabelSpace, seed: u64) -> Result<ThresholdMap> {
        match self {
            RoundingStrategy::Half => ThresholdMap::constant(space, 0.5),
            RoundingStrategy::Global { grid, loss } => {
                fit_global_threshold(raw, y, space, &grid.build()?, *loss)
            }
            RoundingStrategy::PerLevel { grid, loss, budget } => {
                fit_per_level_search(raw, y, space, &grid.build()?, *loss, *budget, seed)
            }
            RoundingStrategy::Graph { grid, mode, tie } => fit_graph_thresholds(
                raw,
                y,
                space,
                &grid.build()?,
                GraphOptions {
                    mode: *mode,
                    tie: *tie,
                },
            )
            .map(|f| f.map),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn space(lo: i32, hi: i32) -> LabelSpace {
        LabelSpace::range(lo, hi).unwrap()
    }

    /// Exhaustive minimum over every offset vector drawn from the grid.
    fn brute_force(raw: &[f64], y: &[i32], lo: i32, grid: &[f64], nb: usize) -> i64 {
        let mut idx = vec![0usize; nb];
        let mut best = i64::MAX;
        loop {
            let map = ThresholdMap::new(lo, idx.iter().map(|&i| grid[i]).collect()).unwrap();
            best = best.min(total_abs_deviation(raw, y, &map));
            let mut pos = 0;
            loop {
                if pos == nb {
                    return best;
                }
                idx[pos] += 1;
                if idx[pos] < grid.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn round_half_rules() {
        let s = space(-1, 21);
        assert_eq!(round_half(3.49, &s).unwrap(), 3);
        assert_eq!(round_half(3.5, &s).unwrap(), 4);
        assert_eq!(round_half(25.3, &s).unwrap(), 21);
        assert_eq!(round_half(-3.7, &s).unwrap(), -1);
    }

    #[test]
    fn half_map_matches_round_half() {
        let s = space(-1, 21);
        let m = ThresholdMap::constant(&s, 0.5).unwrap();
        for k in -400..=400 {
            let x = f64::from(k) * 0.0625 - 0.01;
            assert_eq!(m.apply(x), round_half(x, &s).unwrap(), "x = {x}");
        }
    }

    #[test]
    fn interval_membership() {
        let s = space(0, 5);
        let m = ThresholdMap::constant(&s, 0.9).unwrap();
        assert_eq!(m.apply(3.85), 3);
        assert_eq!(m.apply(3.9), 4);
        assert_eq!(m.threshold(3), Some(3.9));
        let half = ThresholdMap::constant(&s, 0.5).unwrap();
        assert_eq!(half.apply(2.5), 3);
    }

    #[test]
    fn apply_thresholds_checks_coverage() {
        let m = ThresholdMap::constant(&space(0, 3), 0.5).unwrap();
        assert!(apply_thresholds(&[1.0], &m, &space(0, 4)).is_err());
        assert_eq!(apply_thresholds(&[1.7], &m, &space(0, 3)).unwrap(), vec![2]);
    }

    #[test]
    fn json_layout() {
        let m = ThresholdMap::new(-1, vec![0.5, 0.45]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"offsets":{"-1":0.5,"0":0.45}}"#);
        let back: ThresholdMap = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<ThresholdMap>(r#"{"offsets":{"0":0.5,"2":0.5}}"#).is_err());
    }

    #[test]
    fn presets() {
        let r1 = ThresholdGrid::r1();
        assert_eq!(r1.len(), 19);
        assert_eq!(r1.offsets()[0], 0.05);
        assert_eq!(r1.offsets()[18], 0.95);
        let r2 = ThresholdGrid::r2();
        assert_eq!(r2.len(), 11);
        assert_eq!((r2.offsets()[0], r2.offsets()[10]), (0.25, 0.75));
        assert_eq!(ThresholdGrid::figure().offsets()[0], 0.0);
        assert!(ThresholdGrid::new(vec![0.0, 0.5]).is_err());
        assert!(ThresholdGrid::with_zero(vec![0.0, 0.5]).is_ok());
    }

    #[test]
    fn global_flat_loss_takes_smallest() {
        let s = space(0, 4);
        let raw = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0, 1, 2, 3, 4];
        let m = fit_global_threshold(&raw, &y, &s, &ThresholdGrid::r1(), RoundingLoss::Mae).unwrap();
        assert!(m.offsets().iter().all(|&r| r == 0.05));
    }

    #[test]
    fn global_shifted_predictions() {
        let s = space(0, 6);
        let y = [0, 1, 2, 3, 4, 5, 1, 2];
        let raw: Vec<f64> = y.iter().map(|&v| f64::from(v) + 0.4).collect();
        let grid = ThresholdGrid::r1();
        // oracle: sweep the grid and keep the first minimum
        let mut best = (i64::MAX, 0.0);
        for &r in grid.offsets() {
            let c = total_abs_deviation(&raw, &y, &ThresholdMap::constant(&s, r).unwrap());
            if c < best.0 {
                best = (c, r);
            }
        }
        assert_eq!(best.1, 0.45);
        let m = fit_global_threshold(&raw, &y, &s, &grid, RoundingLoss::Mae).unwrap();
        assert!(m.offsets().iter().all(|&r| r == 0.45));
        let m = fit_global_threshold(&raw, &y, &s, &grid, RoundingLoss::MacroMae).unwrap();
        assert!(m.offsets().iter().all(|&r| r == 0.45));
    }

    #[test]
    fn global_single_point_is_half() {
        let s = space(0, 4);
        let raw = [0.2, 1.7, 2.5, 3.1];
        let y = [0, 2, 2, 3];
        let grid = ThresholdGrid::new(vec![0.5]).unwrap();
        let m = fit_global_threshold(&raw, &y, &s, &grid, RoundingLoss::Mae).unwrap();
        for &x in &raw {
            assert_eq!(m.apply(x), round_half(x, &s).unwrap());
        }
    }

    #[test]
    fn empty_grid_rejected() {
        let s = space(0, 2);
        let g = ThresholdGrid::new(vec![]).unwrap();
        assert!(fit_global_threshold(&[0.5], &[0], &s, &g, RoundingLoss::Mae).is_err());
        assert!(fit_per_level_search(&[0.5], &[0], &s, &g, RoundingLoss::Mae, 3, 0).is_err());
        assert!(fit_graph_thresholds(&[0.5], &[0], &s, &g, GraphOptions::default()).is_err());
    }

    #[test]
    fn per_level_budget_zero_is_init() {
        let s = space(0, 3);
        let raw = [0.9, 1.2, 2.6];
        let y = [0, 2, 3];
        let m = fit_per_level_search(&raw, &y, &s, &ThresholdGrid::r1(), RoundingLoss::Mae, 0, 7).unwrap();
        assert!(m.offsets().iter().all(|&r| r == 0.5));
        let g = ThresholdGrid::new(vec![0.2, 0.7]).unwrap();
        let m = fit_per_level_search(&raw, &y, &s, &g, RoundingLoss::Mae, 0, 7).unwrap();
        assert!(m.offsets().iter().all(|&r| r == 0.7));
    }

    #[test]
    fn per_level_matches_per_boundary_optimum() {
        // MAE separates across boundaries, so each coordinate can be optimized alone.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = space(0, 4);
        let grid = ThresholdGrid::r2();
        let n = 80;
        let y: Vec<i32> = (0..n).map(|_| rng.random_range(0..=4)).collect();
        let raw: Vec<f64> = y
            .iter()
            .map(|&v| f64::from(v) + rng.random_range(-0.9..0.9))
            .collect();
        let m = fit_per_level_search(&raw, &y, &s, &grid, RoundingLoss::Mae, 20, 11).unwrap();
        let brute = brute_force(&raw, &y, 0, grid.offsets(), 4);
        assert_eq!(total_abs_deviation(&raw, &y, &m), brute);
        let again = fit_per_level_search(&raw, &y, &s, &grid, RoundingLoss::Mae, 20, 11).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn graph_matches_brute_force_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s = space(0, 3);
        let grid = ThresholdGrid::new(vec![0.2, 0.5, 0.8]).unwrap();
        let y: Vec<i32> = (0..30).map(|_| rng.random_range(0..=3)).collect();
        let raw: Vec<f64> = y
            .iter()
            .map(|&v| f64::from(v) + rng.random_range(-1.2..1.2))
            .collect();
        let fit = fit_graph_thresholds(&raw, &y, &s, &grid, GraphOptions::default()).unwrap();
        assert_eq!(fit.cost, brute_force(&raw, &y, 0, grid.offsets(), 3));
        assert_eq!(fit.cost, total_abs_deviation(&raw, &y, &fit.map));
        assert_eq!(fit.arc_costs.iter().sum::<i64>(), fit.cost);
        assert_eq!(fit.arc_costs.len(), 4);
    }

    #[test]
    fn graph_integral_predictions_half_path() {
        let s = space(0, 4);
        let raw = [0.0, 1.0, 1.0, 3.0, 4.0, 2.0];
        let y = [0, 2, 1, 1, 4, 2];
        let grid = ThresholdGrid::r1();
        let half = ThresholdMap::constant(&s, 0.5).unwrap();
        let half_cost = total_abs_deviation(&raw, &y, &half);
        let mae_n: i64 = raw
            .iter()
            .zip(&y)
            .map(|(&x, &t)| i64::from((round_half(x, &s).unwrap() - t).abs()))
            .sum();
        assert_eq!(half_cost, mae_n);
        let fit = fit_graph_thresholds(&raw, &y, &s, &grid, GraphOptions::default()).unwrap();
        assert_eq!(fit.cost, half_cost);
    }

    #[test]
    fn graph_monotone_infeasible_and_constrained() {
        let s = space(0, 4);
        let raw = [0.3, 1.6, 2.2, 3.9];
        let y = [0, 1, 2, 3];
        let small = ThresholdGrid::new(vec![0.3, 0.6, 0.9]).unwrap();
        let opts = GraphOptions {
            mode: ArcMode::PaperMonotone,
            tie: TieBreak::Smallest,
        };
        assert!(matches!(
            fit_graph_thresholds(&raw, &y, &s, &small, opts),
            Err(Error::Infeasible(_))
        ));
        let fit = fit_graph_thresholds(&raw, &y, &s, &ThresholdGrid::r1(), opts).unwrap();
        assert!(fit.map.offsets().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(fit.cost, total_abs_deviation(&raw, &y, &fit.map));
    }

    #[test]
    fn figure_grid_with_zero_offset() {
        let s = space(0, 4);
        let raw = [0.1, 1.0, 2.3, 3.7];
        let y = [0, 1, 2, 4];
        let fit = fit_graph_thresholds(&raw, &y, &s, &ThresholdGrid::figure(), GraphOptions::default()).unwrap();
        assert_eq!(fit.cost, brute_force(&raw, &y, 0, ThresholdGrid::figure().offsets(), 4));
    }

    #[test]
    fn center_tie_break_prefers_half() {
        let s = space(0, 2);
        let raw = [0.0, 2.0];
        let y = [0, 2];
        let grid = ThresholdGrid::r1();
        let smallest = fit_graph_thresholds(&raw, &y, &s, &grid, GraphOptions::default()).unwrap();
        assert_eq!(smallest.map.offsets(), &[0.05, 0.05]);
        let centered = fit_graph_thresholds(
            &raw,
            &y,
            &s,
            &grid,
            GraphOptions {
                mode: ArcMode::Free,
                tie: TieBreak::Center,
            },
        )
        .unwrap();
        assert_eq!(centered.map.offsets(), &[0.5, 0.5]);
        assert_eq!(centered.cost, smallest.cost);
    }

    fn instance() -> impl Strategy<Value = (i32, Vec<f64>, Vec<i32>, Vec<f64>)> {
        (2i32..5, 1usize..5, 1usize..40).prop_flat_map(|(top, ng, n)| {
            (
                Just(top),
                prop::collection::btree_set(1u32..20, ng)
                    .prop_map(|s| s.into_iter().map(|k| f64::from(k) / 20.0).collect::<Vec<_>>()),
                prop::collection::vec(0..=top, n),
                prop::collection::vec(-1.5f64..1.5, n),
            )
                .prop_map(|(top, grid, y, noise)| {
                    let raw = y.iter().zip(&noise).map(|(&v, e)| f64::from(v) + e).collect();
                    (top, grid, y, raw)
                })
        })
    }

    proptest! {
        #[test]
        fn apply_is_monotone(offsets in prop::collection::vec(0.01f64..0.99, 1..8), a in -3.0f64..12.0, b in -3.0f64..12.0) {
            let m = ThresholdMap::new(0, offsets).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.apply(lo) <= m.apply(hi));
        }

        #[test]
        fn graph_is_optimal_and_cost_decomposes((top, grid, y, raw) in instance()) {
            let s = space(0, top);
            let g = ThresholdGrid::new(grid.clone()).unwrap();
            let fit = fit_graph_thresholds(&raw, &y, &s, &g, GraphOptions::default()).unwrap();
            prop_assert_eq!(fit.cost, brute_force(&raw, &y, 0, &grid, top as usize));
            prop_assert_eq!(fit.cost, total_abs_deviation(&raw, &y, &fit.map));
            prop_assert_eq!(fit.arc_costs.iter().sum::<i64>(), fit.cost);
            for &r in &grid {
                let c = total_abs_deviation(&raw, &y, &ThresholdMap::constant(&s, r).unwrap());
                prop_assert!(fit.cost <= c);
            }
            let again = fit_graph_thresholds(&raw, &y, &s, &g, GraphOptions::default()).unwrap();
            prop_assert_eq!(again, fit);
        }
    }
}
