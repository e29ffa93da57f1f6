//! Experiment configuration: typed parameter tables, JSON config files and the
//! settings hash carried by every output row.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::RunError;

/// Value type of a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Real,
    Int,
    Text(&'static [&'static str]),
    RealList,
    IntList,
}

/// One entry of an experiment's parameter table. Defaults are written in CLI syntax.
#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

fn usage(msg: impl Into<String>) -> RunError {
    RunError::Usage(msg.into())
}

/// Parses a command-line token into a JSON value of the requested kind.
pub fn parse_token(spec: &ParamSpec, raw: &str) -> Result<Value, RunError> {
    let bad = || usage(format!("--{}: cannot parse {raw:?}", spec.name));
    let real = |s: &str| -> Result<f64, RunError> {
        let v: f64 = s.trim().parse().map_err(|_| bad())?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad())
        }
    };
    let int = |s: &str| -> Result<u64, RunError> {
        let s = s.trim();
        s.parse::<u64>().or_else(|_| {
            // accept 1e5 style integers
            let v = real(s)?;
            if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 {
                Ok(v as u64)
            } else {
                Err(bad())
            }
        })
    };
    Ok(match spec.kind {
        Kind::Real => Value::from(real(raw)?),
        Kind::Int => Value::from(int(raw)?),
        Kind::Text(choices) => {
            if !choices.contains(&raw) {
                return Err(usage(format!(
                    "--{}: expected one of {choices:?}, got {raw:?}",
                    spec.name
                )));
            }
            Value::from(raw)
        }
        Kind::RealList => Value::from(raw.split(',').map(real).collect::<Result<Vec<_>, _>>()?),
        Kind::IntList => Value::from(raw.split(',').map(int).collect::<Result<Vec<_>, _>>()?),
    })
}

/// Checks a JSON value from a config file against the parameter's kind.
pub fn coerce_json(spec: &ParamSpec, v: &Value) -> Result<Value, RunError> {
    let as_token = |v: &Value| -> Option<String> {
        match v {
            Value::Number(n) => Some(n.to_string()),
            Value::String(s) => Some(s.clone()),
            _ => None,
        }
    };
    let token = match (spec.kind, v) {
        (Kind::RealList | Kind::IntList, Value::Array(items)) => items
            .iter()
            .map(as_token)
            .collect::<Option<Vec<_>>>()
            .map(|t| t.join(",")),
        (_, v) => as_token(v),
    };
    let token = token.ok_or_else(|| usage(format!("{}: wrong JSON type", spec.name)))?;
    parse_token(spec, &token)
}

/// A resolved experiment configuration. `workers` and `out` do not affect results
/// and are left out of the settings hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            params: BTreeMap::new(),
            seed,
            workers: None,
            out: None,
        }
    }

    /// Sets a parameter from CLI syntax (validated later by [`ExperimentConfig::resolve`]).
    pub fn set(mut self, key: &str, raw: &str) -> Self {
        self.params.insert(key.into(), Value::from(raw));
        self
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String, RunError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fills defaults, rejects unknown keys and normalizes every value to its kind.
    pub fn resolve(&self, table: &[ParamSpec]) -> Result<Self, RunError> {
        if let Some(k) = self
            .params
            .keys()
            .find(|k| !table.iter().any(|s| s.name == k.as_str()))
        {
            return Err(usage(format!("{}: unknown parameter {k:?}", self.command)));
        }
        let mut params = BTreeMap::new();
        for spec in table {
            let v = match self.params.get(spec.name) {
                Some(v) => coerce_json(spec, v)?,
                None => parse_token(spec, spec.default)?,
            };
            params.insert(spec.name.to_string(), v);
        }
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    /// SHA-256 over the canonical JSON of (command, params, seed), first 16 hex digits.
    /// Object keys are sorted, so the hash does not depend on key order.
    pub fn settings_hash(&self) -> String {
        let canonical = serde_json::json!({
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Typed read access to resolved parameters.
pub struct Params<'a>(pub &'a BTreeMap<String, Value>);

impl Params<'_> {
    fn get(&self, key: &str) -> &Value {
        self.0
            .get(key)
            .unwrap_or_else(|| panic!("parameter {key} missing from the table"))
    }

    pub fn real(&self, key: &str) -> f64 {
        self.get(key).as_f64().expect("real parameter")
    }

    pub fn int(&self, key: &str) -> u64 {
        self.get(key).as_u64().expect("integer parameter")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.int(key) as usize
    }

    pub fn text(&self, key: &str) -> &str {
        self.get(key).as_str().expect("text parameter")
    }

    pub fn reals(&self, key: &str) -> Vec<f64> {
        self.get(key)
            .as_array()
            .expect("list parameter")
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect()
    }

    pub fn ints(&self, key: &str) -> Vec<u64> {
        self.get(key)
            .as_array()
            .expect("list parameter")
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &[ParamSpec] = &[
        ParamSpec {
            name: "t",
            kind: Kind::Real,
            default: "2",
            help: "",
        },
        ParamSpec {
            name: "p",
            kind: Kind::Int,
            default: "1",
            help: "",
        },
        ParamSpec {
            name: "ts",
            kind: Kind::RealList,
            default: "0.5,1",
            help: "",
        },
        ParamSpec {
            name: "mode",
            kind: Kind::Text(&["a", "b"]),
            default: "a",
            help: "",
        },
    ];

    #[test]
    fn round_trip_is_identity() {
        let cfg = ExperimentConfig::new("moments", 7)
            .set("p", "3")
            .resolve(TABLE)
            .unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.settings_hash(), back.settings_hash());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = ExperimentConfig::from_json(r#"{"command":"x","seed":1,"params":{"t":3,"p":2}}"#)
            .unwrap();
        let b = ExperimentConfig::from_json(r#"{"params":{"p":2,"t":3},"seed":1,"command":"x"}"#)
            .unwrap();
        assert_eq!(
            a.resolve(TABLE).unwrap().settings_hash(),
            b.resolve(TABLE).unwrap().settings_hash()
        );
        let c = ExperimentConfig::from_json(r#"{"command":"x","seed":2,"params":{"t":3,"p":2}}"#)
            .unwrap();
        assert_ne!(a.settings_hash(), c.settings_hash());
    }

    #[test]
    fn defaults_and_validation() {
        let cfg = ExperimentConfig::new("x", 0).resolve(TABLE).unwrap();
        let p = Params(&cfg.params);
        assert_eq!(p.real("t"), 2.0);
        assert_eq!(p.reals("ts"), vec![0.5, 1.0]);
        assert_eq!(p.text("mode"), "a");
        assert!(ExperimentConfig::new("x", 0)
            .set("q", "1")
            .resolve(TABLE)
            .is_err());
        assert!(ExperimentConfig::new("x", 0)
            .set("mode", "c")
            .resolve(TABLE)
            .is_err());
        assert!(ExperimentConfig::new("x", 0)
            .set("p", "1.5")
            .resolve(TABLE)
            .is_err());
        let big = ExperimentConfig::new("x", 0)
            .set("p", "1e5")
            .resolve(TABLE)
            .unwrap();
        assert_eq!(Params(&big.params).int("p"), 100_000);
    }
}
