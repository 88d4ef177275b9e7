//! Exit codes and failures that end a run.

use hypocert::Error;
use serde_json::{json, Map, Value};

pub const PASS: u8 = 0;
pub const NEGATIVE: u8 = 1;
pub const INPUT: u8 = 2;
pub const DISAGREEMENT: u8 = 3;
pub const CONDITIONING: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
    pub detail: Map<String, Value>,
}

impl CliError {
    pub fn input(message: String) -> Self {
        Self {
            code: INPUT,
            kind: "input",
            message,
            detail: Map::new(),
        }
    }

    pub fn parse(line: usize, column: usize, message: String) -> Self {
        let mut detail = Map::new();
        detail.insert("line".into(), json!(line));
        detail.insert("column".into(), json!(column));
        Self {
            code: INPUT,
            kind: "parse",
            message: format!("line {line}, column {column}: {message}"),
            detail,
        }
    }

    #[cfg(test)]
    pub fn location(&self) -> Option<(usize, usize)> {
        let get = |k: &str| self.detail.get(k).and_then(Value::as_u64).map(|v| v as usize);
        Some((get("line")?, get("column")?))
    }

    pub fn to_json(&self) -> Value {
        let mut v = Map::new();
        v.insert("kind".into(), json!(self.kind));
        v.insert("message".into(), json!(self.message));
        v.extend(self.detail.clone());
        Value::Object(v)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let mut detail = Map::new();
        let (code, kind) = match e {
            Error::Conditioning {
                t,
                defect,
                err,
                suggested_lo,
                suggested_hi,
            } => {
                detail.insert("t".into(), json!(t));
                detail.insert("defect".into(), json!(defect));
                detail.insert("defect_err".into(), json!(err));
                detail.insert("suggested_times".into(), json!([suggested_lo, suggested_hi]));
                (CONDITIONING, "conditioning")
            }
            Error::NotHypocoercive { .. } => (NEGATIVE, "not_hypocoercive"),
            Error::ExpRange { .. } | Error::OutOfRegime(_) | Error::Numerical(_) => (DISAGREEMENT, "numerical"),
            _ => (INPUT, "input"),
        };
        Self {
            code,
            kind,
            message,
            detail,
        }
    }
}
