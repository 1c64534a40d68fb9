//! TOML configuration with environment overrides.
//!
//! Any key can be overridden by `PLEASANCE_<SECTION>_<KEY>`, for example
//! `PLEASANCE_BT_ALPHA=0.05` or `PLEASANCE_SCHEDULE_GAP_REPEATS=[2,1,1]`.
//! Values are read as TOML and fall back to plain strings.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use pleasance_core::bt::{BtOptions, NormalizeOn};
use pleasance_core::protocol::ProtocolConfig;
use pleasance_core::stimulus::StrokeRepeat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENV_PREFIX: &str = "PLEASANCE_";

const SECTIONS: [&str; 5] = ["schedule", "bt", "presenter", "service", "stimulus"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub gap_repeats: Vec<u32>,
    pub synthetic_weight: u32,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self { gap_repeats: p.gap_repeats, synthetic_weight: p.synthetic_weight }
    }
}

impl ScheduleSection {
    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig { gap_repeats: self.gap_repeats.clone(), synthetic_weight: self.synthetic_weight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BtSection {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub normalize_on: NormalizeOn,
}

impl Default for BtSection {
    fn default() -> Self {
        let o = BtOptions::default();
        Self { alpha: o.alpha, tol: o.tol, max_iter: o.max_iter, normalize_on: o.normalize_on }
    }
}

impl BtSection {
    pub fn options(&self) -> BtOptions {
        BtOptions { alpha: self.alpha, tol: self.tol, max_iter: self.max_iter, normalize_on: self.normalize_on }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkKind {
    #[default]
    Log,
    File,
    Stream,
}

impl std::str::FromStr for SinkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "log" => Ok(Self::Log),
            "file" => Ok(Self::File),
            "stream" => Ok(Self::Stream),
            other => Err(format!("unknown presenter sink {other:?} (expected log, file or stream)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresenterSection {
    pub sink: SinkKind,
    /// Trajectory directory for the file sink, relative to the data dir.
    pub file_dir: PathBuf,
    pub stream_addr: SocketAddr,
    pub timeout_ms: u64,
}

impl Default for PresenterSection {
    fn default() -> Self {
        Self {
            sink: SinkKind::Log,
            file_dir: PathBuf::from("trajectories"),
            stream_addr: SocketAddr::from(([127, 0, 0, 1], 7700)),
            timeout_ms: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSection {
    pub bind: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Bearer token for experimenter routes; those routes are closed when unset.
    pub experimenter_token: Option<String>,
}

impl Default for ServiceSection {
    fn default() -> Self {
        Self { bind: "127.0.0.1".into(), port: 8080, data_dir: PathBuf::from("data"), experimenter_token: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StimulusSection {
    pub stroke_repeat: StrokeRepeat,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schedule: ScheduleSection,
    pub bt: BtSection,
    pub presenter: PresenterSection,
    pub service: ServiceSection,
    pub stimulus: StimulusSection,
}

impl Config {
    /// Parses `text` and applies overrides from `env`.
    pub fn from_toml_with_env(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (name, value) in env {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
            let rest = rest.to_ascii_lowercase();
            let Some((section, key)) = SECTIONS
                .iter()
                .find_map(|s| rest.strip_prefix(s).and_then(|k| k.strip_prefix('_')).map(|k| (*s, k.to_string())))
            else {
                continue;
            };
            let entry = table
                .entry(section)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("[{section}] is not a table")))?;
            entry.insert(key, parse_value(&value));
        }
        let config: Config = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads `path` (or defaults when `None`) with the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.protocol().validate().map_err(|e| Error::Config(format!("[schedule] {e}")))?;
        self.bt.options().validate().map_err(|e| Error::Config(format!("[bt] {e}")))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
