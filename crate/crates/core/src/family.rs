//! Mode families `C_eta = eta C_S + C_H` over a finite mode set.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::WeightedOperator;

/// A finite set of modes `E ⊂ R \ (-1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeSet {
    /// Explicit list, kept in the given order.
    List { modes: Vec<f64> },
    /// `{±from, ..., ±to}`.
    Symmetric { from: u64, to: u64 },
}

impl ModeSet {
    pub fn symmetric(from: u64, to: u64) -> Self {
        ModeSet::Symmetric { from, to }
    }

    pub fn list(modes: Vec<f64>) -> Self {
        ModeSet::List { modes }
    }

    pub fn modes(&self) -> Vec<f64> {
        match self {
            ModeSet::List { modes } => modes.clone(),
            ModeSet::Symmetric { from, to } => (*from..=*to)
                .flat_map(|m| [-(m as f64), m as f64])
                .collect(),
        }
    }

    /// Rejects empty sets and modes inside `(-1, 1)`.
    pub fn validate(&self) -> Result<Vec<f64>> {
        let modes = self.modes();
        if modes.is_empty() {
            return Err(Error::EmptyModeSet);
        }
        if let Some(&bad) = modes.iter().find(|e| !(e.abs() >= 1.0) || !e.is_finite()) {
            return Err(Error::ModeOutOfRange(bad));
        }
        Ok(modes)
    }
}

impl fmt::Display for ModeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSet::Symmetric { from, to } => write!(f, "±{from}..±{to}"),
            ModeSet::List { modes } => {
                let parts: Vec<String> = modes.iter().map(|m| m.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// Parses comma-separated items, each either a number or an inclusive
/// integer range `a..b`, e.g. `-20..-1,1..20` or `1,2.5,-3`.
impl FromStr for ModeSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut modes = Vec::new();
        for item in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((lo, hi)) = item.split_once("..") {
                let parse = |x: &str| {
                    x.trim().parse::<i64>().map_err(|_| {
                        Error::InvalidArgument(format!("bad range bound {x:?} in {item:?}"))
                    })
                };
                let (lo, hi) = (parse(lo)?, parse(hi)?);
                if lo > hi {
                    return Err(Error::InvalidArgument(format!("empty range {item:?}")));
                }
                modes.extend((lo..=hi).map(|m| m as f64));
            } else {
                let v = item
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad mode {item:?}")))?;
                modes.push(v);
            }
        }
        let set = ModeSet::List { modes };
        set.validate()?;
        Ok(set)
    }
}

/// Base operator plus the set of modes it is evaluated on.
#[derive(Debug, Clone)]
pub struct ModeFamily {
    pub op: WeightedOperator,
    pub modes: ModeSet,
}

impl ModeFamily {
    pub fn new(op: WeightedOperator, modes: ModeSet) -> Result<Self> {
        modes.validate()?;
        Ok(Self { op, modes })
    }
}

pub(crate) fn check_mode(eta: f64) -> Result<()> {
    if eta.abs() >= 1.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::ModeOutOfRange(eta))
    }
}
