//! Run configuration: defaults, config file, environment, flags.
//!
//! Precedence, highest first: flags, environment (`WEBCENSUS_*`), config
//! file (TOML), built-in defaults. Every effective value remembers where
//! it came from, and `print_effective_config` renders the full resolution
//! in a deterministic order so a run's configuration is auditable.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0}: {1}")]
    File(PathBuf, String),
    #[error("invalid value for {key}: {message}")]
    InvalidValue { key: String, message: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("{0}")]
    Constraint(String),
}

/// Environment variable prefix for overrides: `WEBCENSUS_SAMPLE_N=50`.
pub const ENV_PREFIX: &str = "WEBCENSUS_";

/// All tunables of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Seconds to let a live page settle after navigation.
    pub settle_seconds: u32,
    /// Hard ceiling on a live capture, wrapping the settle window.
    pub hard_timeout_seconds: u32,
    /// Concurrent live captures, each with isolated browser state.
    pub parallel_captures: u32,
    /// Elements considered by the top-element tables and histogram.
    pub top_n: usize,
    /// Leakage sample size.
    pub sample_n: usize,
    /// Leakage sample seed.
    pub seed: u64,
    /// Public-suffix ruleset file; bundled snapshot when unset.
    pub ruleset: Option<PathBuf>,
    /// Ownership database file; bundled snapshot when unset.
    pub owner_db: Option<PathBuf>,
    /// Lexicon file; bundled list when unset.
    pub lexicon: Option<PathBuf>,
    /// Stage input artifact (meaning depends on the stage).
    pub input: Option<PathBuf>,
    /// Root directory for run outputs.
    pub out_dir: PathBuf,
    /// Remote-debugging endpoint (`host:port`) for the scan stage.
    pub browser_endpoint: Option<String>,
    /// Page-list filter: path extensions treated as binary files.
    pub binary_extensions: Vec<String>,
    /// Extensions classified as dynamic pages.
    pub dynamic_page_extensions: Vec<String>,
    /// Include the host in leakage text matching (off by default: terms
    /// inside hostnames would inflate matches).
    pub leakage_include_host: bool,
    /// Skip-and-count corrupt record-log lines instead of failing fast.
    pub tolerant_read: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            settle_seconds: 30,
            hard_timeout_seconds: 60,
            parallel_captures: 4,
            top_n: 100,
            sample_n: 500,
            seed: 1,
            ruleset: None,
            owner_db: None,
            lexicon: None,
            input: None,
            out_dir: PathBuf::from("runs"),
            browser_endpoint: None,
            binary_extensions: crate::capture::DEFAULT_BINARY_EXTENSIONS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            dynamic_page_extensions: crate::uri::DYNAMIC_PAGE_EXTENSIONS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            leakage_include_host: false,
            tolerant_read: false,
        }
    }
}

/// Where an effective value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Default,
    File,
    Env,
    Flag,
}

impl Origin {
    fn label(&self) -> &'static str {
        match self {
            Origin::Default => "default",
            Origin::File => "file",
            Origin::Env => "env",
            Origin::Flag => "flag",
        }
    }
}

/// One resolved key: the effective value, where it came from, and any
/// lower-precedence values it overrode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedValue {
    pub value: String,
    pub origin: Origin,
    pub overridden: Vec<(Origin, String)>,
}

/// The resolved configuration with per-key origins.
#[derive(Debug, Clone)]
pub struct EffectiveConfig {
    pub config: RunConfig,
    /// key -> resolution, every known key present.
    pub entries: BTreeMap<String, ResolvedValue>,
}

const KEYS: &[&str] = &[
    "settle_seconds",
    "hard_timeout_seconds",
    "parallel_captures",
    "top_n",
    "sample_n",
    "seed",
    "ruleset",
    "owner_db",
    "lexicon",
    "input",
    "out_dir",
    "browser_endpoint",
    "binary_extensions",
    "dynamic_page_extensions",
    "leakage_include_host",
    "tolerant_read",
];

fn default_value_string(key: &str, defaults: &RunConfig) -> String {
    match key {
        "settle_seconds" => defaults.settle_seconds.to_string(),
        "hard_timeout_seconds" => defaults.hard_timeout_seconds.to_string(),
        "parallel_captures" => defaults.parallel_captures.to_string(),
        "top_n" => defaults.top_n.to_string(),
        "sample_n" => defaults.sample_n.to_string(),
        "seed" => defaults.seed.to_string(),
        "ruleset" | "owner_db" | "lexicon" | "input" | "browser_endpoint" => String::new(),
        "out_dir" => defaults.out_dir.display().to_string(),
        "binary_extensions" => defaults.binary_extensions.join(","),
        "dynamic_page_extensions" => defaults.dynamic_page_extensions.join(","),
        "leakage_include_host" => defaults.leakage_include_host.to_string(),
        "tolerant_read" => defaults.tolerant_read.to_string(),
        _ => unreachable!("unknown key {key}"),
    }
}

fn apply(config: &mut RunConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    let invalid = |message: String| ConfigError::InvalidValue { key: key.to_string(), message };
    let parse_u32 = |v: &str| v.trim().parse::<u32>().map_err(|e| invalid(e.to_string()));
    let parse_usize = |v: &str| v.trim().parse::<usize>().map_err(|e| invalid(e.to_string()));
    let parse_bool = |v: &str| match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(invalid(format!("expected boolean, got {other:?}"))),
    };
    let parse_list = |v: &str| -> Vec<String> {
        v.split(',')
            .map(|s| s.trim().to_ascii_lowercase())
            .filter(|s| !s.is_empty())
            .collect()
    };
    let opt_path = |v: &str| -> Option<PathBuf> {
        let trimmed = v.trim();
        if trimmed.is_empty() {
            None
        } else {
            Some(PathBuf::from(trimmed))
        }
    };
    match key {
        "settle_seconds" => config.settle_seconds = parse_u32(value)?,
        "hard_timeout_seconds" => config.hard_timeout_seconds = parse_u32(value)?,
        "parallel_captures" => config.parallel_captures = parse_u32(value)?,
        "top_n" => config.top_n = parse_usize(value)?,
        "sample_n" => config.sample_n = parse_usize(value)?,
        "seed" => config.seed = value.trim().parse::<u64>().map_err(|e| invalid(e.to_string()))?,
        "ruleset" => config.ruleset = opt_path(value),
        "owner_db" => config.owner_db = opt_path(value),
        "lexicon" => config.lexicon = opt_path(value),
        "input" => config.input = opt_path(value),
        "out_dir" => config.out_dir = PathBuf::from(value.trim()),
        "browser_endpoint" => {
            config.browser_endpoint = {
                let trimmed = value.trim();
                if trimmed.is_empty() { None } else { Some(trimmed.to_string()) }
            }
        }
        "binary_extensions" => config.binary_extensions = parse_list(value),
        "dynamic_page_extensions" => config.dynamic_page_extensions = parse_list(value),
        "leakage_include_host" => config.leakage_include_host = parse_bool(value)?,
        "tolerant_read" => config.tolerant_read = parse_bool(value)?,
        other => return Err(ConfigError::UnknownKey(other.to_string())),
    }
    Ok(())
}

fn toml_value_to_string(key: &str, value: &toml::Value) -> Result<String, ConfigError> {
    match value {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => {
            let mut parts = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    toml::Value::String(s) => parts.push(s.clone()),
                    other => {
                        return Err(ConfigError::InvalidValue {
                            key: key.to_string(),
                            message: format!("array items must be strings, got {other}"),
                        })
                    }
                }
            }
            Ok(parts.join(","))
        }
        other => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            message: format!("unsupported value {other}"),
        }),
    }
}

/// Resolve the effective configuration.
///
/// `flags` holds only keys the user passed explicitly on the command line.
/// Environment lookups go through `env` so tests can inject values.
pub fn resolve(
    file: Option<&Path>,
    env: &dyn Fn(&str) -> Option<String>,
    flags: &BTreeMap<String, String>,
) -> Result<EffectiveConfig, ConfigError> {
    let defaults = RunConfig::default();
    let mut file_values: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::File(path.to_path_buf(), e.to_string()))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::File(path.to_path_buf(), e.to_string()))?;
        for (key, value) in table {
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            file_values.insert(key.clone(), toml_value_to_string(&key, &value)?);
        }
    }
    for key in flags.keys() {
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
    }

    let mut config = defaults.clone();
    let mut entries = BTreeMap::new();
    for &key in KEYS {
        let env_key = format!("{ENV_PREFIX}{}", key.to_ascii_uppercase());
        // Highest precedence first; later candidates become "overridden".
        let mut candidates: Vec<(Origin, String)> = Vec::new();
        if let Some(v) = flags.get(key) {
            candidates.push((Origin::Flag, v.clone()));
        }
        if let Some(v) = env(&env_key) {
            candidates.push((Origin::Env, v));
        }
        if let Some(v) = file_values.get(key) {
            candidates.push((Origin::File, v.clone()));
        }
        let (origin, value) = candidates
            .first()
            .cloned()
            .unwrap_or((Origin::Default, default_value_string(key, &defaults)));
        if origin != Origin::Default {
            apply(&mut config, key, &value)?;
        }
        entries.insert(
            key.to_string(),
            ResolvedValue { value, origin, overridden: candidates.into_iter().skip(1).collect() },
        );
    }

    validate(&config)?;
    Ok(EffectiveConfig { config, entries })
}

/// Enforce the configuration invariants: counts at least 1, settle within
/// the hard timeout.
pub fn validate(config: &RunConfig) -> Result<(), ConfigError> {
    let counts = [
        ("settle_seconds", config.settle_seconds as u64),
        ("hard_timeout_seconds", config.hard_timeout_seconds as u64),
        ("parallel_captures", config.parallel_captures as u64),
        ("top_n", config.top_n as u64),
        ("sample_n", config.sample_n as u64),
    ];
    for (key, value) in counts {
        if value < 1 {
            return Err(ConfigError::Constraint(format!("{key} must be at least 1")));
        }
    }
    if config.settle_seconds > config.hard_timeout_seconds {
        return Err(ConfigError::Constraint(format!(
            "settle_seconds ({}) must not exceed hard_timeout_seconds ({})",
            config.settle_seconds, config.hard_timeout_seconds
        )));
    }
    Ok(())
}

/// Render every effective value with its origin, one line per key in
/// deterministic order. Values shadowed by a higher-precedence source are
/// listed alongside the winner.
pub fn print_effective_config(effective: &EffectiveConfig) -> String {
    let mut out = String::new();
    for (key, resolved) in &effective.entries {
        let shown = if resolved.value.is_empty() { "(unset)" } else { resolved.value.as_str() };
        let mut origin = resolved.origin.label().to_string();
        for (source, value) in &resolved.overridden {
            let _ = write!(origin, ", overrides {}={}", source.label(), value);
        }
        let _ = writeln!(out, "{key} = {shown}  ({origin})");
    }
    out
}

/// Short digest of the effective configuration, used in run-directory names.
pub fn config_digest(effective: &EffectiveConfig) -> String {
    let mut canonical = String::new();
    for (key, resolved) in &effective.entries {
        let _ = writeln!(canonical, "{key}={}", resolved.value);
    }
    let digest = Sha256::digest(canonical.as_bytes());
    format!("{digest:x}")[..8].to_string()
}
