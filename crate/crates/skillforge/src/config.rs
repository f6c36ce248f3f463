//! TOML inputs: simulator config, cost model, price table and scenarios.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use skillforge_core::metrics::{CostModel, PriceTable};
use skillforge_core::sim::{SimConfig, SyntheticTask};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl ConfigError {
    pub fn is_io(&self) -> bool {
        matches!(self, ConfigError::Io { .. })
    }
}

fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })
}

fn invalid(path: &Path, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { path: path.into(), message: message.to_string() }
}

/// A simulator config. Missing keys take their defaults.
pub fn load_sim_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let config: SimConfig = read_toml(path)?;
    config.validate().map_err(|e| invalid(path, e))?;
    Ok(config)
}

pub fn load_cost_model(path: &Path) -> Result<CostModel, ConfigError> {
    let model: CostModel = read_toml(path)?;
    model.validate().map_err(|e| invalid(path, e))?;
    Ok(model)
}

/// One table per model name with `cached`, `input` and `output` prices per
/// million tokens.
pub fn load_prices(path: &Path) -> Result<PriceTable, ConfigError> {
    let table: PriceTable = read_toml(path)?;
    for (model, p) in &table {
        for (name, v) in [("cached", p.cached), ("input", p.input), ("output", p.output)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(path, format!("{model}.{name} = {v} must be a nonnegative number")));
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    config: SimConfig,
    seed_library: Option<PathBuf>,
    tasks: Vec<SyntheticTask>,
}

/// A scripted task list replayed instead of a generated stream.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SimConfig,
    /// Seed library directory, resolved against the scenario file.
    pub seed_library: Option<PathBuf>,
    pub tasks: Vec<SyntheticTask>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let file: ScenarioFile = read_toml(path)?;
    let mut config = file.config;
    config.n_tasks = file.tasks.len();
    config.validate().map_err(|e| invalid(path, e))?;
    let mut ids: Vec<&str> = file.tasks.iter().map(|t| t.task_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(invalid(path, format!("task id {} repeats", w[0])));
    }
    if ids.first() == Some(&"") {
        return Err(invalid(path, "a task has no task_id"));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let seed_library = file.seed_library.map(|p| base.join(p));
    Ok(Scenario { config, seed_library, tasks: file.tasks })
}
