//! Run configuration: one TOML file, optionally named by `OPPORTUNE_CONFIG`,
//! patched with `key.path=value` overrides. Relative paths are taken from
//! the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::execution::SimConfig;
use crate::integration::PipelineConfig;
use crate::matching::MatchConfig;
use crate::ontology::SvMode;
use crate::par::Execution;
use crate::planner::PlannerConfig;

pub const CONFIG_ENV: &str = "OPPORTUNE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeConfig {
    /// Local edge table (TSV).
    pub edges: Option<PathBuf>,
    /// Fetch missing terms over HTTP; needs the `online` feature.
    pub online: bool,
    pub endpoint: String,
    pub timeout_ms: u64,
    /// Fetched edges are appended here.
    pub cache: Option<PathBuf>,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        KnowledgeConfig {
            edges: None,
            online: false,
            endpoint: "https://api.conceptnet.io".into(),
            timeout_ms: 10_000,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OntologyConfig {
    /// Directory of repository ontologies.
    pub repo: Option<PathBuf>,
    pub sv_mode: SvMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// JSON facts file.
    pub path: Option<PathBuf>,
    /// Base URL of an HTTP provider; used when no path is set.
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig { path: None, endpoint: None, timeout_ms: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalPlannerConfig {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub knowledge: KnowledgeConfig,
    pub planner: PlannerConfig,
    /// Replaces the built-in planner when set.
    pub external_planner: Option<ExternalPlannerConfig>,
    pub ontology: OntologyConfig,
    pub provider: ProviderConfig,
    pub execution: SimConfig,
    pub parallel: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            matching: MatchConfig::default(),
            knowledge: KnowledgeConfig::default(),
            planner: PlannerConfig::default(),
            external_planner: None,
            ontology: OntologyConfig::default(),
            provider: ProviderConfig::default(),
            execution: SimConfig::default(),
            parallel: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("bad override `{0}`: expected key.path=value")]
    Override(String),
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value, raw: &str) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(raw.into()));
    }
    let (last, heads) = parts.split_last().expect("split yields one part");
    let mut t = table;
    for h in heads {
        let entry = t.entry(h.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| ConfigError::Override(raw.into()))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

fn override_value(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

impl Config {
    /// Parses `text` and applies `overrides`; relative paths are joined to
    /// `base` when given.
    pub fn from_toml(text: &str, overrides: &[String], base: Option<&Path>) -> Result<Config, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            set_path(&mut table, k.trim(), override_value(v.trim()), o)?;
        }
        let mut cfg: Config =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        if let Some(b) = base {
            cfg.resolve(b);
        }
        Ok(cfg)
    }

    /// Reads `path`, or the file named by `OPPORTUNE_CONFIG`, or starts from
    /// defaults.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config, ConfigError> {
        let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let Some(p) = path.map(Path::to_path_buf).or(env) else {
            return Config::from_toml("", overrides, None);
        };
        let text = std::fs::read_to_string(&p)
            .map_err(|e| ConfigError::Io { path: p.display().to_string(), msg: e.to_string() })?;
        Config::from_toml(&text, overrides, p.parent())
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p.as_mut().filter(|x| x.is_relative()) {
                *x = base.join(&*x);
            }
        };
        fix(&mut self.knowledge.edges);
        fix(&mut self.knowledge.cache);
        fix(&mut self.ontology.repo);
        fix(&mut self.provider.path);
    }

    pub fn exec(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            matching: self.matching,
            planner: self.planner,
            sv_mode: self.ontology.sv_mode,
            exec: self.exec(),
        }
    }
}
