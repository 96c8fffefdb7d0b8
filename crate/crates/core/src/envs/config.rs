use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Scenario description as read from JSON.
///
/// ```json
/// {"name": "ctc_small", "scenario": "ctc", "hunters": 3, "banks": 1, "treasures": 3,
///  "static_groups": [[0, 1, 2], [3], [0, 1, 2, 3]]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: ScenarioKind,
    /// Contact distance for collisions, pickups and deposits.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Displacement of one movement action.
    #[serde(default = "default_step")]
    pub step_size: f64,
    /// Penalty per colliding pair (CN) or per colliding agent (CTC).
    #[serde(default)]
    pub collision_penalty: Option<f64>,
    #[serde(default = "default_bonus")]
    pub pickup_bonus: f64,
    #[serde(default = "default_bonus")]
    pub deposit_bonus: f64,
    /// Hyperedges for the static-hypergraph ablation, as agent index lists.
    #[serde(default)]
    pub static_groups: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Cooperative navigation: hunters cover landmarks.
    Cn { hunters: usize, landmarks: usize },
    /// Cooperative treasure collection: hunters pick up treasures, banks
    /// accept deposits of their own color.
    Ctc {
        hunters: usize,
        banks: usize,
        treasures: usize,
    },
    /// Rover-tower: blind rovers guided by paired towers' messages.
    Rt { rovers: usize, landmarks: usize },
}

fn default_radius() -> f64 {
    0.1
}

fn default_step() -> f64 {
    0.1
}

fn default_bonus() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn n_agents(&self) -> usize {
        match self.kind {
            ScenarioKind::Cn { hunters, .. } => hunters,
            ScenarioKind::Ctc { hunters, banks, .. } => hunters + banks,
            ScenarioKind::Rt { rovers, .. } => 2 * rovers,
        }
    }

    pub fn collision_penalty(&self) -> f64 {
        self.collision_penalty.unwrap_or(match self.kind {
            ScenarioKind::Cn { .. } => 1.0,
            ScenarioKind::Ctc { .. } => 0.5,
            ScenarioKind::Rt { .. } => 0.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, n: usize| {
            if n == 0 {
                Err(config_err(format!("scenario `{}` needs at least one {what}", self.name)))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ScenarioKind::Cn { hunters, landmarks } => {
                positive("hunter", hunters)?;
                positive("landmark", landmarks)?;
            }
            ScenarioKind::Ctc {
                hunters,
                banks,
                treasures,
            } => {
                positive("hunter", hunters)?;
                positive("bank", banks)?;
                positive("treasure", treasures)?;
            }
            ScenarioKind::Rt { rovers, landmarks } => {
                positive("rover", rovers)?;
                positive("landmark", landmarks)?;
            }
        }
        if !(self.radius > 0.0 && self.step_size > 0.0) {
            return Err(config_err("radius and step_size must be positive"));
        }
        if let Some(groups) = &self.static_groups {
            let n = self.n_agents();
            for (j, g) in groups.iter().enumerate() {
                if g.is_empty() {
                    return Err(config_err(format!("static group {j} is empty")));
                }
                if let Some(&v) = g.iter().find(|&&v| v >= n) {
                    return Err(config_err(format!(
                        "static group {j} names agent {v}; scenario has {n} agents"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Built-in scenarios: desk-scale (`*_small`, `cn_3v3`) and full-scale
/// (`*_full`) configurations.
pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    let base = |name: &str, kind: ScenarioKind, groups: Option<Vec<Vec<usize>>>| ScenarioConfig {
        name: name.to_string(),
        kind,
        radius: default_radius(),
        step_size: default_step(),
        collision_penalty: None,
        pickup_bonus: default_bonus(),
        deposit_bonus: default_bonus(),
        static_groups: groups,
    };
    let cfg = match name {
        "cn_small" => base(
            name,
            ScenarioKind::Cn {
                hunters: 2,
                landmarks: 2,
            },
            None,
        ),
        "cn_3v3" => base(
            name,
            ScenarioKind::Cn {
                hunters: 3,
                landmarks: 3,
            },
            None,
        ),
        "cn_full" => base(
            name,
            ScenarioKind::Cn {
                hunters: 5,
                landmarks: 5,
            },
            None,
        ),
        "ctc_small" => base(
            name,
            ScenarioKind::Ctc {
                hunters: 3,
                banks: 1,
                treasures: 3,
            },
            Some(vec![vec![0, 1, 2], vec![3], vec![0, 1, 2, 3]]),
        ),
        "ctc_full" => base(
            name,
            ScenarioKind::Ctc {
                hunters: 6,
                banks: 2,
                treasures: 6,
            },
            Some(vec![(0..6).collect(), vec![6, 7], (0..8).collect()]),
        ),
        "rt_small" => base(
            name,
            ScenarioKind::Rt {
                rovers: 2,
                landmarks: 2,
            },
            None,
        ),
        "rt_full" => base(
            name,
            ScenarioKind::Rt {
                rovers: 4,
                landmarks: 4,
            },
            None,
        ),
        _ => return None,
    };
    Some(cfg)
}

pub const BUILTIN_NAMES: &[&str] = &[
    "cn_small", "cn_3v3", "cn_full", "ctc_small", "ctc_full", "rt_small", "rt_full",
];
