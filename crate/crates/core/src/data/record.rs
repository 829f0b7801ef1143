//! Raw monster stat blocks and the fixed 32-slot feature layout.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::dice::DiceExpr;
use crate::error::{Error, Result};

pub const MIN_RAW_LEVEL: i32 = -1;
pub const MAX_RAW_LEVEL: i32 = 27;
/// Levels above this are merged into a single top category.
pub const LEVEL_CAP: i32 = 21;

pub const NUM_FEATURES: usize = 32;

/// Canonical feature order. Serialized datasets and models depend on it.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "str",
    "dex",
    "con",
    "int",
    "wis",
    "cha",
    "ac",
    "hp",
    "perception",
    "fortitude",
    "reflex",
    "will",
    "land_speed",
    "fly_speed",
    "swim_speed",
    "num_immunities",
    "spells_level_1",
    "spells_level_2",
    "spells_level_3",
    "spells_level_4",
    "spells_level_5",
    "spells_level_6",
    "spells_level_7",
    "spells_level_8",
    "spells_level_9",
    "highest_spell_level",
    "spell_dc",
    "spell_attack",
    "melee_max_bonus",
    "melee_avg_damage",
    "ranged_max_bonus",
    "ranged_avg_damage",
];

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Abilities {
    pub str: i32,
    pub dex: i32,
    pub con: i32,
    pub int: i32,
    pub wis: i32,
    pub cha: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Saves {
    pub fortitude: i32,
    pub reflex: i32,
    pub will: i32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Speeds {
    #[serde(default)]
    pub land: Option<i32>,
    #[serde(default)]
    pub fly: Option<i32>,
    #[serde(default)]
    pub swim: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attack {
    pub bonus: i32,
    pub damage: DiceExpr,
}

/// One raw stat block as supplied by the user.
///
/// Abilities, AC and HP are mandatory; every other capability may be absent
/// and is imputed to 0 during feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonsterRecord {
    pub id: String,
    pub name: String,
    pub publication_date: NaiveDate,
    pub source_book: String,
    pub raw_level: i32,
    pub abilities: Abilities,
    pub ac: i32,
    pub hp: i32,
    pub perception: i32,
    pub saves: Saves,
    #[serde(default)]
    pub speeds: Speeds,
    #[serde(default)]
    pub immunities: Vec<String>,
    #[serde(default)]
    pub spell_counts: Option<BTreeMap<u8, u32>>,
    #[serde(default)]
    pub spell_dc: Option<i32>,
    #[serde(default)]
    pub spell_attack: Option<i32>,
    #[serde(default)]
    pub melee_attacks: Vec<Attack>,
    #[serde(default)]
    pub ranged_attacks: Vec<Attack>,
}

/// The 32 engineered features of one monster plus its clamped level.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; NUM_FEATURES],
    pub level: i32,
}

/// Merges the rare levels above [`LEVEL_CAP`] into the cap.
pub fn clamp_level(raw_level: i32) -> Result<i32> {
    if !(MIN_RAW_LEVEL..=MAX_RAW_LEVEL).contains(&raw_level) {
        return Err(Error::Domain {
            value: i64::from(raw_level),
            domain: format!("raw level {MIN_RAW_LEVEL}..={MAX_RAW_LEVEL}"),
        });
    }
    Ok(raw_level.min(LEVEL_CAP))
}

/// Highest bonus and the expected damage of the attack carrying it.
/// The first attack wins among equal bonuses; no attacks gives (0, 0).
fn best_attack(attacks: &[Attack]) -> (f64, f64) {
    let mut best: Option<&Attack> = None;
    for a in attacks {
        if best.is_none_or(|b| a.bonus > b.bonus) {
            best = Some(a);
        }
    }
    best.map(|a| (f64::from(a.bonus), a.damage.expected_value()))
        .unwrap_or((0.0, 0.0))
}

pub fn extract_features(record: &MonsterRecord) -> Result<FeatureVector> {
    let level = clamp_level(record.raw_level).map_err(|e| Error::Ingest {
        location: format!("record `{}`, field raw_level", record.id),
        reason: e.to_string(),
    })?;
    let mut spells = [0.0f64; 9];
    let mut highest = 0.0;
    if let Some(counts) = &record.spell_counts {
        for (&lvl, &n) in counts {
            if !(1..=9).contains(&lvl) {
                return Err(Error::Ingest {
                    location: format!("record `{}`, field spell_counts", record.id),
                    reason: format!("spell level {lvl} outside 1..=9"),
                });
            }
            spells[usize::from(lvl) - 1] = f64::from(n);
            if n > 0 {
                highest = f64::max(highest, f64::from(lvl));
            }
        }
    }
    let (melee_bonus, melee_dmg) = best_attack(&record.melee_attacks);
    let (ranged_bonus, ranged_dmg) = best_attack(&record.ranged_attacks);
    let a = &record.abilities;
    let opt = |v: Option<i32>| v.map(f64::from).unwrap_or(0.0);

    let mut values = [0.0; NUM_FEATURES];
    let head = [
        a.str,
        a.dex,
        a.con,
        a.int,
        a.wis,
        a.cha,
        record.ac,
        record.hp,
        record.perception,
        record.saves.fortitude,
        record.saves.reflex,
        record.saves.will,
    ];
    for (slot, v) in values.iter_mut().zip(head) {
        *slot = f64::from(v);
    }
    values[12] = opt(record.speeds.land);
    values[13] = opt(record.speeds.fly);
    values[14] = opt(record.speeds.swim);
    values[15] = record.immunities.len() as f64;
    values[16..25].copy_from_slice(&spells);
    values[25] = highest;
    values[26] = opt(record.spell_dc);
    values[27] = opt(record.spell_attack);
    values[28] = melee_bonus;
    values[29] = melee_dmg;
    values[30] = ranged_bonus;
    values[31] = ranged_dmg;

    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Ingest {
            location: format!("record `{}`, feature {}", record.id, FEATURE_NAMES[i]),
            reason: "non-finite value".into(),
        });
    }
    Ok(FeatureVector { values, level })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dice::parse_dice_expression;

    pub(crate) fn sample_record() -> MonsterRecord {
        MonsterRecord {
            id: "m1".into(),
            name: "Goblin Warrior".into(),
            publication_date: NaiveDate::from_ymd_opt(2019, 8, 1).unwrap(),
            source_book: "Bestiary".into(),
            raw_level: -1,
            abilities: Abilities {
                str: 0,
                dex: 3,
                con: 1,
                int: 0,
                wis: -1,
                cha: 1,
            },
            ac: 16,
            hp: 6,
            perception: 2,
            saves: Saves {
                fortitude: 5,
                reflex: 7,
                will: 3,
            },
            speeds: Speeds {
                land: Some(25),
                fly: None,
                swim: None,
            },
            immunities: vec![],
            spell_counts: None,
            spell_dc: None,
            spell_attack: None,
            melee_attacks: vec![
                Attack {
                    bonus: 10,
                    damage: parse_dice_expression("1d6").unwrap(),
                },
                Attack {
                    bonus: 12,
                    damage: parse_dice_expression("1d4").unwrap(),
                },
            ],
            ranged_attacks: vec![],
        }
    }

    #[test]
    fn feature_names_are_unique_and_complete() {
        let mut names = FEATURE_NAMES.to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), NUM_FEATURES);
    }

    #[test]
    fn clamp_level_rules() {
        assert_eq!(clamp_level(27).unwrap(), 21);
        assert_eq!(clamp_level(20).unwrap(), 20);
        assert_eq!(clamp_level(-1).unwrap(), -1);
        assert!(matches!(clamp_level(28), Err(Error::Domain { .. })));
        assert!(matches!(clamp_level(-2), Err(Error::Domain { .. })));
    }

    #[test]
    fn missing_capabilities_impute_to_zero() {
        let fv = extract_features(&sample_record()).unwrap();
        let idx = |n: &str| feature_index(n).unwrap();
        assert_eq!(fv.values[idx("fly_speed")], 0.0);
        assert_eq!(fv.values[idx("swim_speed")], 0.0);
        assert_eq!(fv.values[idx("land_speed")], 25.0);
        assert_eq!(fv.values[idx("num_immunities")], 0.0);
        assert_eq!(fv.values[idx("spell_dc")], 0.0);
        assert_eq!(fv.values[idx("highest_spell_level")], 0.0);
        assert_eq!(fv.values[idx("ranged_max_bonus")], 0.0);
        assert_eq!(fv.values[idx("ranged_avg_damage")], 0.0);
        assert_eq!(fv.level, -1);
    }

    #[test]
    fn melee_damage_follows_max_bonus() {
        let fv = extract_features(&sample_record()).unwrap();
        assert_eq!(fv.values[feature_index("melee_max_bonus").unwrap()], 12.0);
        assert_eq!(fv.values[feature_index("melee_avg_damage").unwrap()], 2.5);
    }

    #[test]
    fn spells_and_highest_level() {
        let mut r = sample_record();
        r.spell_counts = Some(BTreeMap::from([(1, 3), (4, 2), (6, 0)]));
        r.immunities = vec!["fire".into(), "poison".into()];
        let fv = extract_features(&r).unwrap();
        assert_eq!(fv.values[16], 3.0);
        assert_eq!(fv.values[19], 2.0);
        assert_eq!(fv.values[25], 4.0);
        assert_eq!(fv.values[15], 2.0);
    }

    #[test]
    fn bad_spell_level_is_an_ingest_error() {
        let mut r = sample_record();
        r.spell_counts = Some(BTreeMap::from([(10, 1)]));
        assert!(matches!(extract_features(&r), Err(Error::Ingest { .. })));
    }

    #[test]
    fn out_of_range_level_rejected() {
        let mut r = sample_record();
        r.raw_level = 30;
        assert!(extract_features(&r).is_err());
    }
}
