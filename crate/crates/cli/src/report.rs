use std::fmt;
use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use bellwire::io::round10;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const OUT_DIR_ENV: &str = "BELLWIRE_OUT_DIR";

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GUARD: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<bellwire::Error> for CliError {
    fn from(e: bellwire::Error) -> Self {
        use bellwire::Error as E;
        let code = match e {
            E::GuardExceeded { .. } => EXIT_GUARD,
            E::Json(_)
            | E::InvalidFunctional(_)
            | E::InvalidScenario(_)
            | E::InvalidProtocol(_)
            | E::InvalidArgument(_)
            | E::InvalidTheta(_)
            | E::InvalidState(_)
            | E::InvalidObservable(_)
            | E::OutOfScenario(_)
            | E::ScenarioMismatch(_)
            | E::DimensionMismatch(_) => EXIT_CONFIG,
            _ => EXIT_FAILURE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn read_config(path: &PathBuf) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; defaults to $BELLWIRE_OUT_DIR/<command>.<ext> or stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Every float rounded to 10 significant digits.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => json!(round10(n.as_f64().unwrap())),
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

pub fn config_hash(config: &Value) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(config).expect("config serializes")))
}

/// A finished command: the reproducibility stamp, a JSON body and a CSV table.
pub struct Report {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    pub result: Value,
    pub csv: String,
    /// Emit the result's fields at the top level, so the file is itself a
    /// loadable document.
    pub flat: bool,
}

impl Report {
    pub fn stamp(&self) -> Value {
        json!({
            "version": VERSION,
            "command": self.command,
            "seed": self.seed,
            "config_hash": config_hash(&self.config),
        })
    }

    pub fn to_json(&self) -> String {
        let mut doc = Map::new();
        doc.insert("run".into(), self.stamp());
        doc.insert("config".into(), self.config.clone());
        match (&self.result, self.flat) {
            (Value::Object(fields), true) => doc.extend(fields.clone()),
            _ => {
                doc.insert("result".into(), self.result.clone());
            }
        }
        let mut s = serde_json::to_string_pretty(&round_floats(Value::Object(doc))).unwrap();
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        format!(
            "# bellwire {VERSION} {} seed={seed} config={}\n{}",
            self.command,
            config_hash(&self.config),
            self.csv
        )
    }

    pub fn emit(&self, out: &OutputArgs) -> CliResult<()> {
        let text = match out.format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        };
        let path = out.out.clone().or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .map(|d| PathBuf::from(d).join(format!("{}.{}", self.command, out.format.extension())))
        });
        write_text(path.as_ref(), &text)
    }
}

pub fn write_text(path: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            }
            fs::write(p, text).map_err(|e| io_error(p, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn io_error(p: &std::path::Path, e: std::io::Error) -> CliError {
    CliError {
        code: EXIT_FAILURE,
        message: format!("{}: {e}", p.display()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_rounded_everywhere() {
        let v = round_floats(json!({"a": [1.23456789012345, 2], "b": {"c": 0.1 + 0.2}}));
        assert_eq!(v, json!({"a": [1.23456789, 2], "b": {"c": 0.3}}));
    }

    #[test]
    fn hash_depends_on_config() {
        assert_eq!(config_hash(&json!({"n": 1})), config_hash(&json!({"n": 1})));
        assert_ne!(config_hash(&json!({"n": 1})), config_hash(&json!({"n": 2})));
        assert_eq!(config_hash(&json!({})).len(), 64);
    }
}
