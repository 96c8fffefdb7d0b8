use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hgac::envs::{builtin, ScenarioConfig, BUILTIN_NAMES};
use hgac::learner::{Algorithm, TrainConfig};
use hgac::{Error, Result};
use serde::{Deserialize, Serialize};

/// Environment variable naming the directory under which runs are written.
pub const OUT_ROOT_VAR: &str = "HGAC_OUT_DIR";
pub const DEFAULT_OUT_ROOT: &str = "runs";

/// Floating-point type used for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    F32,
    F64,
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarKind::F32 => "f32",
            ScalarKind::F64 => "f64",
        })
    }
}

impl FromStr for ScalarKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(ScalarKind::F32),
            "f64" => Ok(ScalarKind::F64),
            _ => Err(Error::Config(format!("unknown scalar `{s}` (f32, f64)"))),
        }
    }
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Built-in scenario name, or the `name` field of `scenario_path`.
    pub scenario: String,
    pub scenario_path: Option<PathBuf>,
    pub algo: Algorithm,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    /// Incidence heatmaps are dumped every this many episodes; 0 disables
    /// periodic dumps (a final dump is always written).
    pub heatmap_every: usize,
    pub scalar: ScalarKind,
    /// Single rollout worker and a zero `seconds` column, so that metrics
    /// files are byte-identical across runs.
    pub deterministic: bool,
}

impl RunConfig {
    pub fn new(scenario: &str, algo: Algorithm, train: TrainConfig, out_dir: PathBuf) -> Self {
        Self {
            scenario: scenario.to_string(),
            scenario_path: None,
            algo,
            train,
            out_dir,
            heatmap_every: 1000,
            scalar: ScalarKind::F32,
            deterministic: false,
        }
    }

    /// Applies `deterministic` and checks that the scenario resolves and
    /// supports the chosen algorithm.
    pub fn finalize(mut self) -> Result<(Self, ScenarioConfig)> {
        if self.deterministic {
            self.train.rollout_workers = 1;
        }
        self.train.validate()?;
        let env = match &self.scenario_path {
            Some(p) => load_scenario_file(p)?,
            None => resolve_scenario(&self.scenario)?,
        };
        self.scenario = env.name.clone();
        self.algo.critic_config(&env)?;
        Ok((self, env))
    }

    /// `<root>/<scenario>_<algo>_s<seed>`.
    pub fn default_out_dir(root: &Path, scenario: &str, algo: Algorithm, seed: u64) -> PathBuf {
        let stem = Path::new(scenario)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| scenario.to_string());
        root.join(format!("{stem}_{algo}_s{seed}"))
    }
}

/// Output root from the environment, falling back to `./runs`.
pub fn out_root() -> PathBuf {
    std::env::var_os(OUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_json(&text)
}

/// A built-in name, or else a path to a scenario JSON file.
pub fn resolve_scenario(name_or_path: &str) -> Result<ScenarioConfig> {
    if let Some(cfg) = builtin(name_or_path) {
        return Ok(cfg);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load_scenario_file(path);
    }
    Err(Error::Config(format!(
        "`{name_or_path}` is neither a scenario file nor a built-in ({})",
        BUILTIN_NAMES.join(", ")
    )))
}
