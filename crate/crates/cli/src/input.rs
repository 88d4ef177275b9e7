//! Matrix and initial-data files.
//!
//! Entries are bare numbers or `[re, im]` pairs. Syntax and type errors
//! carry the line and column of the offending token; shape errors name the
//! matrix and the row.

use std::fmt;
use std::path::Path;

use hypocert::linalg::{c64, split, CMatrix, CVector, Weight, WeightedOperator};
use hypocert::ph::PhSystem;
use num_complex::Complex64;
use serde::de::{self, Deserializer, IgnoredAny, SeqAccess, Visitor};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

struct Entry(Complex64);

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(EntryVisitor)
    }
}

struct EntryVisitor;

impl<'de> Visitor<'de> for EntryVisitor {
    type Value = Entry;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number or a [re, im] pair")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Entry, E> {
        Ok(Entry(c64(v, 0.0)))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Entry, E> {
        Ok(Entry(c64(v as f64, 0.0)))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Entry, E> {
        Ok(Entry(c64(v as f64, 0.0)))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Entry, A::Error> {
        let re: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
        let im: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
        if seq.next_element::<IgnoredAny>()?.is_some() {
            return Err(de::Error::invalid_length(3, &self));
        }
        Ok(Entry(c64(re, im)))
    }
}

type RawMatrix = Vec<Vec<Entry>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    n: usize,
    weight: Option<RawMatrix>,
    #[serde(rename = "C")]
    c: Option<RawMatrix>,
    #[serde(rename = "P1")]
    p1: Option<RawMatrix>,
    #[serde(rename = "R")]
    r: Option<RawMatrix>,
    #[serde(rename = "H")]
    h: Option<RawMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSamples {
    samples: Vec<Vec<Entry>>,
}

/// Either a single operator `C` over an optional weight, or a
/// port-Hamiltonian triple whose `H` is the weight.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Direct { c: CMatrix, weight: Option<CMatrix> },
    Triple { p1: CMatrix, r: CMatrix, h: CMatrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub n: usize,
    pub operator: Operator,
}

/// File contents with the digest of the raw bytes.
pub struct Loaded<T> {
    pub value: T,
    pub sha256: String,
}

fn read(path: &Path) -> Result<(String, String), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let text = String::from_utf8(bytes)
        .map_err(|e| CliError::input(format!("{} is not UTF-8: {e}", path.display())))?;
    Ok((text, digest))
}

fn json_error(e: serde_json::Error) -> CliError {
    let (line, column) = (e.line(), e.column());
    let full = e.to_string();
    let suffix = format!(" at line {line} column {column}");
    let message = full.strip_suffix(&suffix).unwrap_or(&full).to_string();
    CliError::parse(line, column, message)
}

fn to_matrix(name: &str, raw: RawMatrix, n: usize) -> Result<CMatrix, CliError> {
    if raw.len() != n {
        return Err(CliError::input(format!("{name} has {} rows, expected {n}", raw.len())));
    }
    for (i, row) in raw.iter().enumerate() {
        if row.len() != n {
            return Err(CliError::input(format!(
                "row {} of {name} has {} entries, expected {n}",
                i + 1,
                row.len()
            )));
        }
    }
    Ok(CMatrix::from_fn(n, n, |i, j| raw[i][j].0))
}

pub fn parse_matrix_file(text: &str) -> Result<MatrixFile, CliError> {
    let raw: RawFile = serde_json::from_str(text).map_err(json_error)?;
    let n = raw.n;
    if n == 0 {
        return Err(CliError::input("n must be at least 1".into()));
    }
    let operator = match (raw.c, raw.p1, raw.r, raw.h) {
        (Some(c), None, None, None) => Operator::Direct {
            c: to_matrix("C", c, n)?,
            weight: raw.weight.map(|w| to_matrix("weight", w, n)).transpose()?,
        },
        (None, Some(p1), Some(r), Some(h)) => {
            if raw.weight.is_some() {
                return Err(CliError::input("a P1/R/H file takes its weight from H; drop \"weight\"".into()));
            }
            Operator::Triple {
                p1: to_matrix("P1", p1, n)?,
                r: to_matrix("R", r, n)?,
                h: to_matrix("H", h, n)?,
            }
        }
        (Some(_), ..) => return Err(CliError::input("give either C or P1, R and H, not both".into())),
        (None, p1, r, h) => {
            let missing: Vec<&str> = [("P1", p1.is_none()), ("R", r.is_none()), ("H", h.is_none())]
                .into_iter()
                .filter_map(|(name, gone)| gone.then_some(name))
                .collect();
            return Err(CliError::input(format!("missing matrix {}", missing.join(", "))));
        }
    };
    Ok(MatrixFile { n, operator })
}

pub fn load_matrix_file(path: &Path) -> Result<Loaded<MatrixFile>, CliError> {
    let (text, sha256) = read(path)?;
    Ok(Loaded {
        value: parse_matrix_file(&text)?,
        sha256,
    })
}

/// Uniform samples `x(2 pi k / N)`, `k = 0..N`, each of length `n`.
pub fn parse_samples(text: &str, n: usize) -> Result<Vec<CVector>, CliError> {
    let raw: RawSamples = serde_json::from_str(text).map_err(json_error)?;
    if raw.samples.is_empty() {
        return Err(CliError::input("samples is empty".into()));
    }
    raw.samples
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            if s.len() != n {
                return Err(CliError::input(format!(
                    "sample {} has {} entries, expected {n}",
                    k + 1,
                    s.len()
                )));
            }
            Ok(CVector::from_iterator(n, s.into_iter().map(|e| e.0)))
        })
        .collect()
}

pub fn load_samples(path: &Path, n: usize) -> Result<Loaded<Vec<CVector>>, CliError> {
    let (text, sha256) = read(path)?;
    Ok(Loaded {
        value: parse_samples(&text, n)?,
        sha256,
    })
}

pub fn entry_json(z: &Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn matrix_json(a: &CMatrix) -> Value {
    Value::Array(
        (0..a.nrows())
            .map(|i| Value::Array((0..a.ncols()).map(|j| entry_json(&a[(i, j)])).collect()))
            .collect(),
    )
}

pub fn vector_json(x: &CVector) -> Value {
    Value::Array(x.iter().map(entry_json).collect())
}

impl MatrixFile {
    /// The file as it would be written, with every entry as `[re, im]`.
    pub fn to_json(&self) -> Value {
        match &self.operator {
            Operator::Direct { c, weight } => {
                let mut v = json!({ "n": self.n, "C": matrix_json(c) });
                if let Some(w) = weight {
                    v["weight"] = matrix_json(w);
                }
                v
            }
            Operator::Triple { p1, r, h } => json!({
                "n": self.n,
                "P1": matrix_json(p1),
                "R": matrix_json(r),
                "H": matrix_json(h),
            }),
        }
    }

    pub fn weighted_operator(&self) -> Result<WeightedOperator, CliError> {
        match &self.operator {
            Operator::Direct { c, weight } => {
                let w = match weight {
                    Some(h) => Weight::new(h.clone())?,
                    None => Weight::identity(self.n),
                };
                let op = split(c, &w)?;
                op.ensure_accretive()?;
                Ok(op)
            }
            Operator::Triple { .. } => Ok(self.ph_system()?.operator().clone()),
        }
    }

    pub fn ph_system(&self) -> Result<PhSystem, CliError> {
        match &self.operator {
            Operator::Triple { p1, r, h } => Ok(PhSystem::new(p1.clone(), r.clone(), h.clone())?),
            Operator::Direct { .. } => Err(CliError::input("this command needs P1, R and H".into())),
        }
    }
}
