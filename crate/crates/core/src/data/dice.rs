//! Dice damage expressions such as `2d8 + 1d4 + 3`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One `NdM` term: `count` dice with `faces` sides each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DiceTerm {
    pub count: u32,
    pub faces: u32,
}

/// A sum of dice terms plus a constant modifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiceExpr {
    terms: Vec<DiceTerm>,
    modifier: i64,
}

impl DiceExpr {
    pub fn new(terms: Vec<DiceTerm>, modifier: i64) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::DiceParse {
                token: String::new(),
                reason: "expression needs at least one NdM term".into(),
            });
        }
        if let Some(t) = terms.iter().find(|t| t.count == 0 || t.faces == 0) {
            return Err(Error::DiceParse {
                token: format!("{}d{}", t.count, t.faces),
                reason: "dice count and faces must be at least 1".into(),
            });
        }
        Ok(Self { terms, modifier })
    }

    pub fn terms(&self) -> &[DiceTerm] {
        &self.terms
    }

    pub fn modifier(&self) -> i64 {
        self.modifier
    }

    /// Mean of the rolled total: `sum(count * (faces + 1) / 2) + modifier`.
    pub fn expected_value(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| f64::from(t.count) * (f64::from(t.faces) + 1.0) / 2.0)
            .sum::<f64>()
            + self.modifier as f64
    }

    /// Concatenates the terms and adds the modifiers.
    pub fn concat(&self, other: &DiceExpr) -> DiceExpr {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        DiceExpr {
            terms,
            modifier: self.modifier + other.modifier,
        }
    }
}

/// Parses `NdM` terms and non-negative integer constants joined by `+`.
///
/// Whitespace is ignored and `d` is case-insensitive. Subtraction and bare
/// `dM` terms are rejected.
pub fn parse_dice_expression(text: &str) -> Result<DiceExpr> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(Error::DiceParse {
            token: text.to_string(),
            reason: "empty expression".into(),
        });
    }
    let mut terms = Vec::new();
    let mut modifier: i64 = 0;
    for token in compact.split('+') {
        if token.is_empty() {
            return Err(Error::DiceParse {
                token: compact.clone(),
                reason: "empty term around `+`".into(),
            });
        }
        match token.find(['d', 'D']) {
            Some(pos) => {
                let count = parse_positive(&token[..pos], token, "dice count")?;
                let faces = parse_positive(&token[pos + 1..], token, "die faces")?;
                terms.push(DiceTerm { count, faces });
            }
            None => {
                let c = parse_digits(token, token, "constant")?;
                modifier = modifier.checked_add(c).ok_or_else(|| Error::DiceParse {
                    token: token.to_string(),
                    reason: "constant overflow".into(),
                })?;
            }
        }
    }
    DiceExpr::new(terms, modifier)
}

fn parse_digits(s: &str, token: &str, what: &str) -> Result<i64> {
    if s.is_empty() {
        return Err(Error::DiceParse {
            token: token.to_string(),
            reason: format!("missing {what}"),
        });
    }
    if !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::DiceParse {
            token: token.to_string(),
            reason: format!("{what} must be a non-negative integer"),
        });
    }
    s.parse::<i64>().map_err(|_| Error::DiceParse {
        token: token.to_string(),
        reason: format!("{what} out of range"),
    })
}

fn parse_positive(s: &str, token: &str, what: &str) -> Result<u32> {
    let v = parse_digits(s, token, what)?;
    if v < 1 || v > i64::from(u32::MAX) {
        return Err(Error::DiceParse {
            token: token.to_string(),
            reason: format!("{what} must be between 1 and {}", u32::MAX),
        });
    }
    Ok(v as u32)
}

impl fmt::Display for DiceExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{}d{}", t.count, t.faces)?;
        }
        if self.modifier != 0 {
            write!(f, "+{}", self.modifier)?;
        }
        Ok(())
    }
}

impl FromStr for DiceExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_dice_expression(s)
    }
}

impl Serialize for DiceExpr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DiceExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_dice_expression(&s).map_err(serde::de::Error::custom)
    }
}
