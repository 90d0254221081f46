//! Report documents and their JSON and CSV renderings.

use std::str::FromStr;

use pfdr_sizer::Error;
use serde_json::{Map, Number, Value};

use crate::commands::status_of;
use crate::config::{Format, RunConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Unattainable,
    InsufficientHits,
    DegenerateScenario,
    Error,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Unattainable => "unattainable",
            Status::InsufficientHits => "insufficient_hits",
            Status::DegenerateScenario => "degenerate_scenario",
            Status::Error => "error",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            _ => 1,
        }
    }
}

/// A float with 17 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&format!("{x:.16e}")).expect("formatted float is a JSON number"))
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub inputs: Map<String, Value>,
    pub outputs: Map<String, Value>,
    pub diagnostics: Map<String, Value>,
    pub status: Status,
    pub seed: Option<u64>,
}

impl Report {
    pub fn new(cfg: &RunConfig) -> Self {
        let inputs = cfg
            .parameters
            .iter()
            .map(|(k, v)| {
                // numeric inputs keep their literal text
                let value = Number::from_str(v).map(Value::Number).unwrap_or_else(|_| Value::String(v.clone()));
                (k.clone(), value)
            })
            .collect();
        Self {
            command: cfg.command.as_str().into(),
            inputs,
            outputs: Map::new(),
            diagnostics: Map::new(),
            status: Status::Ok,
            seed: cfg.seed,
        }
    }

    pub fn fail(&mut self, e: &Error) {
        self.status = status_of(e);
        self.outputs.insert("error".into(), e.to_string().into());
        match *e {
            Error::NotAttainable { n_max, rho_at_max, q } => {
                self.outputs.insert("n_max".into(), n_max.into());
                self.outputs.insert("rho_at_n_max".into(), num(rho_at_max));
                self.outputs.insert("q_value".into(), num(q));
            }
            Error::InsufficientHits { numerator, denominator, required } => {
                self.outputs.insert("numerator_hits".into(), numerator.into());
                self.outputs.insert("denominator_hits".into(), denominator.into());
                self.outputs.insert("required_hits".into(), required.into());
            }
            Error::DegenerateScenario { rejection_prob } => {
                self.outputs.insert("rejection_prob".into(), num(rejection_prob));
            }
            _ => {}
        }
    }

    pub fn to_value(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("command".into(), self.command.clone().into());
        doc.insert("status".into(), self.status.as_str().into());
        doc.insert("tool_version".into(), TOOL_VERSION.into());
        doc.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
        doc.insert("inputs".into(), Value::Object(self.inputs.clone()));
        doc.insert("outputs".into(), Value::Object(self.outputs.clone()));
        doc.insert("diagnostics".into(), Value::Object(self.diagnostics.clone()));
        Value::Object(doc)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_value()).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut rows = Vec::new();
                flatten("", &self.to_value(), &mut rows);
                let mut s = String::from("key,value\n");
                for (k, v) in rows {
                    s += &format!("{},{}\n", csv_field(&k), csv_field(&v));
                }
                s
            }
        }
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten(&join(k), child, rows);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), child, rows);
            }
        }
        Value::Null => rows.push((prefix.to_string(), String::new())),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        let v = num(0.1);
        assert_eq!(v.to_string(), "1.0000000000000001e-1");
        assert_eq!(v.as_f64(), Some(0.1));
        let third = num(1.0 / 3.0);
        assert_eq!(third.as_f64(), Some(1.0 / 3.0));
        assert_eq!(num(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(num(f64::NAN), Value::String("nan".into()));
    }

    #[test]
    fn csv_quotes_and_flattens() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
        let mut rows = Vec::new();
        flatten("", &serde_json::json!({"a": {"b": [1, null]}, "c": "x"}), &mut rows);
        assert_eq!(
            rows,
            vec![("a.b.0".into(), "1".into()), ("a.b.1".into(), String::new()), ("c".into(), "x".into())]
        );
    }
}
