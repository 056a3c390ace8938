use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cayley_lp::Group;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Exponent choice: a fixed `p ≥ 2`, or `auto` to run the selection first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub enum PSetting {
    Auto,
    Fixed(f64),
}

// Goes through `Value` rather than an untagged enum: untagged numbers do
// not survive serde_json's arbitrary-precision mode.
impl TryFrom<Value> for PSetting {
    type Error = String;

    fn try_from(v: Value) -> Result<Self, String> {
        match v {
            Value::Number(n) => n.as_f64().map(PSetting::Fixed).ok_or_else(|| format!("bad p {n}")),
            Value::String(s) => s.parse(),
            other => Err(format!("p must be a number or \"auto\", got {other}")),
        }
    }
}

impl From<PSetting> for Value {
    fn from(p: PSetting) -> Self {
        match p {
            PSetting::Auto => Value::String("auto".into()),
            PSetting::Fixed(p) => serde_json::json!(p),
        }
    }
}

impl FromStr for PSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "auto" => Ok(PSetting::Auto),
            t => t
                .parse::<f64>()
                .map(PSetting::Fixed)
                .map_err(|_| format!("p must be a number or \"auto\", got {s:?}")),
        }
    }
}

impl fmt::Display for PSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PSetting::Auto => f.write_str("auto"),
            PSetting::Fixed(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `free:2`, `cyclic:2,3` or `ball:<path>`.
    pub group: String,
    pub radius: u32,
    pub delta: u32,
    pub p: PSetting,
    pub seed: u64,
    pub samples: usize,
    pub memory_budget_mb: u64,
    pub output: Option<PathBuf>,
    /// Generator labels from least to greatest; tie-breaks geodesics.
    pub generator_order: Option<Vec<String>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            group: "free:2".into(),
            radius: 8,
            delta: 1,
            p: PSetting::Auto,
            seed: 0,
            samples: 2000,
            memory_budget_mb: 2048,
            output: None,
            generator_order: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.radius == 0 {
            return bad("radius must be positive".into());
        }
        if self.delta == 0 {
            return bad("delta must be positive".into());
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        if self.memory_budget_mb == 0 {
            return bad("memory_budget_mb must be positive".into());
        }
        if let PSetting::Fixed(p) = self.p {
            if !(p >= 2.0 && p.is_finite()) {
                return bad(format!("p must be at least 2, got {p}"));
            }
        }
        Ok(())
    }

    pub fn build_group(&self) -> Result<Group, CliError> {
        self.validate()?;
        let group = Group::from_descriptor(&self.group, self.delta)?;
        match &self.generator_order {
            Some(order) => {
                let labels: Vec<&str> = order.iter().map(String::as_str).collect();
                Ok(group.with_generator_order(&labels)?)
            }
            None => Ok(group),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_setting_round_trips() {
        let c: RunConfig = serde_json::from_str(r#"{"group":"cyclic:2,3","p":"auto"}"#).unwrap();
        assert_eq!(c.p, PSetting::Auto);
        let c: RunConfig = serde_json::from_str(r#"{"p":3.5,"radius":4}"#).unwrap();
        assert_eq!((c.p, c.radius), (PSetting::Fixed(3.5), 4));
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        assert!(serde_json::from_str::<RunConfig>(r#"{"p":"big"}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"colour":1}"#).is_err());
    }

    #[test]
    fn validation() {
        let c = RunConfig {
            p: PSetting::Fixed(1.5),
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            radius: 0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
