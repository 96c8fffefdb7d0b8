//! Decentralized actors and the centralized hypergraph-convolution critic.

pub mod actor;
pub mod critic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::envs::{AgentSpec, Role};
use crate::error::{config_err, Result};

pub use actor::{Actors, PolicyDistribution};
pub use critic::{Critic, CriticConfig, CriticGraph, CriticInput, CriticOutput, IncidenceMode};

/// Agents of a scenario grouped by role. Agents sharing a role share actor
/// parameters and critic input embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentLayout {
    specs: Vec<AgentSpec>,
    roles: Vec<Role>,
    members: BTreeMap<Role, Vec<usize>>,
}

impl AgentLayout {
    pub fn new(specs: Vec<AgentSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(config_err("layout needs at least one agent"));
        }
        let mut roles = Vec::new();
        let mut members: BTreeMap<Role, Vec<usize>> = BTreeMap::new();
        for (i, s) in specs.iter().enumerate() {
            if s.obs_dim == 0 || s.n_actions == 0 {
                return Err(config_err(format!("agent {i} has an empty observation or action set")));
            }
            let entry = members.entry(s.role).or_default();
            if let Some(&first) = entry.first() {
                let f = specs[first];
                if (f.obs_dim, f.n_actions) != (s.obs_dim, s.n_actions) {
                    return Err(config_err(format!(
                        "agents {first} and {i} share role {} but differ in shape",
                        s.role.name()
                    )));
                }
            } else {
                roles.push(s.role);
            }
            entry.push(i);
        }
        Ok(Self {
            specs,
            roles,
            members,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.specs.len()
    }

    pub fn spec(&self, agent: usize) -> AgentSpec {
        self.specs[agent]
    }

    pub fn specs(&self) -> &[AgentSpec] {
        &self.specs
    }

    /// Distinct roles in order of first appearance.
    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn members(&self, role: Role) -> &[usize] {
        self.members.get(&role).map_or(&[], Vec::as_slice)
    }

    pub fn role_spec(&self, role: Role) -> AgentSpec {
        self.specs[self.members(role)[0]]
    }

    pub fn is_homogeneous(&self) -> bool {
        self.roles.len() == 1
    }
}
