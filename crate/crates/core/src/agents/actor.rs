use ndarray::Array2;
use rand::Rng;

use crate::agents::AgentLayout;
use crate::approximator::{mlp_eval, mlp_forward, Activation, MlpSpec, ParamStore, Tape, Var};
use crate::envs::Role;
use crate::error::{config_err, Result};
use crate::scalar::Scalar;

pub const ACTOR_HIDDEN: usize = 64;

/// Categorical distribution over one agent's discrete actions.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution<T> {
    pub probs: Vec<T>,
    pub log_probs: Vec<T>,
}

impl<T: Scalar> PolicyDistribution<T> {
    /// Numerically stable log-softmax of `logits`.
    pub fn from_logits(logits: &[T]) -> Self {
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
        let log_probs: Vec<T> = logits.iter().map(|&l| l - lse).collect();
        let probs = log_probs.iter().map(|&l| l.exp()).collect();
        Self { probs, log_probs }
    }

    pub fn n_actions(&self) -> usize {
        self.probs.len()
    }

    /// Inverse-CDF draw from a uniform `u` in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (a, p) in self.probs.iter().enumerate() {
            acc += p.as_f64();
            if u < acc {
                return a;
            }
        }
        self.probs.len() - 1
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.sample_with(rng.gen::<f64>())
    }

    pub fn entropy(&self) -> T {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .map(|(&p, &l)| p * l)
            .sum::<T>()
    }

    /// `KL(self || uniform)`.
    pub fn kl_from_uniform(&self) -> T {
        let ln_n = T::lit(self.probs.len() as f64).ln();
        ln_n - self.entropy()
    }
}

/// Per-role categorical policies over local observations. Agents of one
/// role share parameters, so a homogeneous scenario has a single actor.
#[derive(Debug, Clone, PartialEq)]
pub struct Actors {
    layout: AgentLayout,
}

impl Actors {
    pub fn new(layout: AgentLayout) -> Self {
        Self { layout }
    }

    pub fn layout(&self) -> &AgentLayout {
        &self.layout
    }

    pub fn prefix(role: Role) -> String {
        format!("actor.{}", role.name())
    }

    pub fn spec(&self, role: Role) -> MlpSpec {
        let s = self.layout.role_spec(role);
        MlpSpec {
            widths: vec![s.obs_dim, ACTOR_HIDDEN, ACTOR_HIDDEN, s.n_actions],
            hidden: Activation::Relu,
            output: Activation::Identity,
        }
    }

    pub fn init_params<T: Scalar, R: Rng>(&self, rng: &mut R) -> Result<ParamStore<T>> {
        let mut store = ParamStore::new();
        for &role in self.layout.roles() {
            self.spec(role).init_params(&mut store, &Self::prefix(role), rng)?;
        }
        Ok(store)
    }

    /// Policy of `agent` given only its own observation.
    pub fn actor_forward<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        agent: usize,
        obs: &[T],
    ) -> Result<PolicyDistribution<T>> {
        let role = self.layout.spec(agent).role;
        let spec = self.spec(role);
        if obs.len() != spec.input_width() {
            return Err(config_err(format!(
                "agent {agent} observation has {} entries, expected {}",
                obs.len(),
                spec.input_width()
            )));
        }
        let x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).expect("row vector");
        let logits = mlp_eval(&spec, params, &Self::prefix(role), x)?;
        Ok(PolicyDistribution::from_logits(logits.row(0).as_slice().expect("contiguous")))
    }

    /// Policies for every agent at once.
    pub fn joint_policy<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        obs: &[Vec<T>],
    ) -> Result<Vec<PolicyDistribution<T>>> {
        (0..self.layout.n_agents())
            .map(|i| self.actor_forward(params, i, &obs[i]))
            .collect()
    }

    /// Records the logits of `role` for a stack of observations (one row per
    /// sample-agent pair) on `tape`.
    pub fn logits_on_tape<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        role: Role,
        obs: Array2<T>,
    ) -> Result<Var> {
        let x = tape.leaf(obs);
        mlp_forward(tape, &self.spec(role), params, &Self::prefix(role), x)
    }
}
