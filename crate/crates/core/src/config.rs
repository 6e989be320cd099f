//! Scenario documents as read from JSON files.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryStrategy;
use crate::harness::{Scenario, SecretPolicy};
use crate::protocol::{ProtocolKind, Variant};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format `{other}` (expected json or csv)")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

/// A scenario plus output controls. Omitted counts fall back to the
/// protocol's defaults: `check_rounds = m`, and `2m` decoys per sequence
/// (`m` for the baseline).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub schema_version: u32,
    pub protocol: ProtocolKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoy_count: Option<usize>,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub adversary: AdversaryStrategy,
    #[serde(default)]
    pub secrets: SecretPolicy,
    #[serde(default = "one")]
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub announce_results: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_pool: Option<Vec<u64>>,
    #[serde(default)]
    pub decoy_tolerance: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigErrorKind {
    Io,
    Syntax,
    Schema,
    Version,
    Scenario,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    /// Dotted path of the offending key, when known.
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ConfigErrorKind::Io => "cannot read config",
            ConfigErrorKind::Syntax => "malformed config",
            ConfigErrorKind::Schema => "schema violation",
            ConfigErrorKind::Version => "unsupported schema version",
            ConfigErrorKind::Scenario => "invalid scenario",
        };
        match &self.field {
            Some(field) => write!(f, "{kind} at `{field}`: {}", self.message),
            None => write!(f, "{kind}: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn unknown_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ConfigDocument = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.to_string();
            let kind = if inner.is_syntax() || inner.is_eof() { ConfigErrorKind::Syntax } else { ConfigErrorKind::Schema };
            let mut field = (path != ".").then_some(path);
            if let Some(key) = unknown_field(&message) {
                field = Some(match field {
                    Some(parent) if !parent.ends_with(&key) => format!("{parent}.{key}"),
                    Some(parent) => parent,
                    None => key,
                });
            }
            ConfigError { kind, field, message }
        })?;
        if doc.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError {
                kind: ConfigErrorKind::Version,
                field: Some("schema_version".into()),
                message: format!("expected {CONFIG_SCHEMA_VERSION}, found {}", doc.schema_version),
            });
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            kind: ConfigErrorKind::Io,
            field: None,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Builds and validates the scenario; `seed` is used when the document has none.
    pub fn to_scenario(&self, seed: u64) -> Result<Scenario, ConfigError> {
        let n = match (self.protocol, self.n) {
            (_, Some(n)) => n,
            (ProtocolKind::ZhangBaseline, None) => 2,
            (ProtocolKind::Proposed, None) => {
                return Err(ConfigError {
                    kind: ConfigErrorKind::Schema,
                    field: Some("n".into()),
                    message: "missing field `n`".into(),
                })
            }
        };
        let default_decoys = match self.protocol {
            ProtocolKind::Proposed => 2 * self.m,
            ProtocolKind::ZhangBaseline => self.m,
        };
        let scenario = Scenario {
            protocol: self.protocol,
            n,
            m: self.m,
            check_rounds: self.check_rounds.unwrap_or(self.m),
            decoys: self.decoy_count.unwrap_or(default_decoys),
            variant: self.variant,
            announce_results: self.announce_results,
            state_pool: self.state_pool.clone(),
            decoy_tolerance: self.decoy_tolerance,
            adversary: self.adversary.clone(),
            secrets: self.secrets.clone(),
            trials: self.trials,
            seed: self.seed.unwrap_or(seed),
        };
        scenario.validate().map_err(|e| ConfigError {
            kind: ConfigErrorKind::Scenario,
            field: e.field().map(|f| if f == "decoys" { "decoy_count".into() } else { f }),
            message: e.to_string(),
        })?;
        Ok(scenario)
    }

    /// Document that reproduces `s` exactly.
    pub fn from_scenario(s: &Scenario) -> Self {
        ConfigDocument {
            schema_version: CONFIG_SCHEMA_VERSION,
            protocol: s.protocol,
            n: Some(s.n),
            m: s.m,
            check_rounds: Some(s.check_rounds),
            decoy_count: Some(s.decoys),
            variant: s.variant,
            adversary: s.adversary.clone(),
            secrets: s.secrets.clone(),
            trials: s.trials,
            seed: Some(s.seed),
            announce_results: s.announce_results,
            state_pool: s.state_pool.clone(),
            decoy_tolerance: s.decoy_tolerance,
            output: None,
        }
    }
}
