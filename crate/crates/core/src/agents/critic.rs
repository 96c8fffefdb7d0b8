//! Centralized multi-head hypergraph-convolution critic.
//!
//! Per agent `i` the critic embeds `concat(o_i, onehot(a_i))` with a
//! role-specific linear map into `x_i`. Each of `K` heads builds its own
//! incidence matrix from the embeddings (MLP softmax or query/key attention)
//! or reuses a fixed one, then runs two convolution layers to get `x'_{i,k}`.
//! `Q_i = MLP(concat(x_i, x'_{i,1}, ..., x'_{i,K}))` with ReLU hidden layers
//! and a linear output, shared by all agents.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::AgentLayout;
use crate::approximator::{mlp_forward, Activation, MlpSpec, ParamStore, Tape, Var};
use crate::error::{config_err, Error, Result};
use crate::hypergraph::{
    attention_incidence_on_tape, convolve_on_tape, generator_spec, mlp_incidence_on_tape,
    static_incidence, IncidenceMatrix,
};
use crate::scalar::Scalar;

/// How each head obtains its incidence matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncidenceMode {
    /// Row-wise softmax over `hyperedges` MLP logits.
    Mlp { hyperedges: usize },
    /// One hyperedge per agent from attention scores, forced unit diagonal.
    Attention,
    /// Fixed 0/1 hypergraph, one hyperedge per group.
    Static { groups: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub mode: IncidenceMode,
    pub heads: usize,
    pub embed_dim: usize,
    pub attn_dim: usize,
    pub conv_hidden: usize,
    pub conv_out: usize,
    pub q_hidden: usize,
}

impl CriticConfig {
    /// Engine defaults: 4 heads, 32-wide embeddings and convolutions, a
    /// 64-unit Q head.
    pub fn new(mode: IncidenceMode) -> Self {
        Self {
            mode,
            heads: 4,
            embed_dim: 32,
            attn_dim: 32,
            conv_hidden: 32,
            conv_out: 32,
            q_hidden: 64,
        }
    }
}

/// One joint observation-action sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticInput<T> {
    pub obs: Vec<Vec<T>>,
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticOutput<T> {
    pub q: Vec<T>,
    pub incidence_per_head: Vec<IncidenceMatrix<T>>,
}

/// Handles into a recorded batched critic pass.
#[derive(Debug, Clone)]
pub struct CriticGraph {
    /// `(B*N) x 1`, row `b*N + i` is `Q_i` of sample `b`; `B x 1` when
    /// recorded for a single agent.
    pub q: Var,
    /// Per head, `(B*N) x M` stacked incidence matrices.
    pub incidence: Vec<Var>,
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    cfg: CriticConfig,
    layout: AgentLayout,
}

impl Critic {
    pub fn new(cfg: CriticConfig, layout: AgentLayout) -> Result<Self> {
        if cfg.heads == 0 {
            return Err(config_err("critic needs at least one head"));
        }
        let n = layout.n_agents();
        match &cfg.mode {
            IncidenceMode::Mlp { hyperedges } if *hyperedges == 0 => {
                return Err(config_err("hyperedge count must be at least 1"));
            }
            IncidenceMode::Static { groups } => {
                static_incidence::<f64>(groups, n)?;
            }
            _ => {}
        }
        Ok(Self { cfg, layout })
    }

    pub fn config(&self) -> &CriticConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &AgentLayout {
        &self.layout
    }

    pub fn n_hyperedges(&self) -> usize {
        match &self.cfg.mode {
            IncidenceMode::Mlp { hyperedges } => *hyperedges,
            IncidenceMode::Attention => self.layout.n_agents(),
            IncidenceMode::Static { groups } => groups.len(),
        }
    }

    fn embed_spec(&self, role: crate::envs::Role) -> MlpSpec {
        let s = self.layout.role_spec(role);
        MlpSpec {
            widths: vec![s.obs_dim + s.n_actions, self.cfg.embed_dim],
            hidden: Activation::Identity,
            output: Activation::Identity,
        }
    }

    fn embed_prefix(role: crate::envs::Role) -> String {
        format!("critic.embed.{}", role.name())
    }

    fn q_spec(&self) -> MlpSpec {
        MlpSpec {
            widths: vec![
                self.cfg.embed_dim + self.cfg.heads * self.cfg.conv_out,
                self.cfg.q_hidden,
                1,
            ],
            hidden: Activation::Relu,
            output: Activation::Identity,
        }
    }

    pub fn head_prefix(k: usize) -> String {
        format!("critic.head{k}")
    }

    pub fn init_params<T: Scalar, R: Rng>(&self, rng: &mut R) -> Result<ParamStore<T>> {
        let mut store = ParamStore::new();
        for &role in self.layout.roles() {
            self.embed_spec(role)
                .init_params(&mut store, &Self::embed_prefix(role), rng)?;
        }
        let d = self.cfg.embed_dim;
        let m = self.n_hyperedges();
        for k in 0..self.cfg.heads {
            let hp = Self::head_prefix(k);
            match self.cfg.mode {
                IncidenceMode::Mlp { hyperedges } => {
                    generator_spec(d, hyperedges)?.init_params(&mut store, &format!("{hp}.gen"), rng)?;
                }
                IncidenceMode::Attention => {
                    store.insert_glorot(format!("{hp}.wq"), self.cfg.attn_dim, d, rng)?;
                    store.insert_glorot(format!("{hp}.wk"), self.cfg.attn_dim, d, rng)?;
                }
                IncidenceMode::Static { .. } => {}
            }
            store.insert_zeros(format!("{hp}.log_w"), m, 1)?;
            store.insert_glorot(format!("{hp}.conv0"), d, self.cfg.conv_hidden, rng)?;
            store.insert_glorot(format!("{hp}.conv1"), self.cfg.conv_hidden, self.cfg.conv_out, rng)?;
        }
        self.q_spec().init_params(&mut store, "critic.q", rng)?;
        Ok(store)
    }

    fn check_sample<T: Scalar>(&self, b: usize, obs: &[Vec<T>], actions: &[usize]) -> Result<()> {
        let n = self.layout.n_agents();
        if obs.len() != n || actions.len() != n {
            return Err(config_err(format!(
                "sample {b}: {} observations and {} actions for {n} agents",
                obs.len(),
                actions.len()
            )));
        }
        for i in 0..n {
            let s = self.layout.spec(i);
            if obs[i].len() != s.obs_dim {
                return Err(config_err(format!(
                    "sample {b}: agent {i} observation has {} entries, expected {}",
                    obs[i].len(),
                    s.obs_dim
                )));
            }
            if let Some(k) = obs[i].iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "critic observation".into(),
                    index: vec![b, i, k],
                });
            }
            if actions[i] >= s.n_actions {
                return Err(config_err(format!(
                    "sample {b}: agent {i} action {} outside 0..{}",
                    actions[i], s.n_actions
                )));
            }
        }
        Ok(())
    }

    /// Records the critic for a batch of joint samples on `tape`.
    pub fn record<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        samples: &[(&[Vec<T>], &[usize])],
    ) -> Result<CriticGraph> {
        self.record_inner(tape, params, samples, None)
    }

    /// As [`Critic::record`], but the Q head only runs for `agent`; the
    /// returned `q` is `B x 1`.
    pub fn record_agent<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        samples: &[(&[Vec<T>], &[usize])],
        agent: usize,
    ) -> Result<CriticGraph> {
        if agent >= self.layout.n_agents() {
            return Err(config_err(format!("no agent {agent}")));
        }
        self.record_inner(tape, params, samples, Some(agent))
    }

    fn record_inner<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        samples: &[(&[Vec<T>], &[usize])],
        only: Option<usize>,
    ) -> Result<CriticGraph> {
        let batch = samples.len();
        if batch == 0 {
            return Err(config_err("critic batch is empty"));
        }
        for (b, (obs, actions)) in samples.iter().enumerate() {
            self.check_sample(b, obs, actions)?;
        }
        let n = self.layout.n_agents();

        let mut parts = Vec::with_capacity(self.layout.roles().len());
        for &role in self.layout.roles() {
            let members = self.layout.members(role);
            let s = self.layout.role_spec(role);
            let width = s.obs_dim + s.n_actions;
            let mut input = Array2::zeros((batch * members.len(), width));
            let mut dest = Vec::with_capacity(batch * members.len());
            for (b, (obs, actions)) in samples.iter().enumerate() {
                for (k, &i) in members.iter().enumerate() {
                    let mut row = input.row_mut(b * members.len() + k);
                    for (c, &v) in obs[i].iter().enumerate() {
                        row[c] = v;
                    }
                    row[s.obs_dim + actions[i]] = T::one();
                    dest.push(b * n + i);
                }
            }
            let leaf = tape.leaf(input);
            let e = mlp_forward(tape, &self.embed_spec(role), params, &Self::embed_prefix(role), leaf)?;
            parts.push((e, dest));
        }
        let x = tape.assemble_rows(batch * n, parts);

        let static_h = match &self.cfg.mode {
            IncidenceMode::Static { groups } => {
                let h = static_incidence::<T>(groups, n)?.into_entries();
                let leaf = tape.leaf(h);
                Some(tape.tile_rows(leaf, batch))
            }
            _ => None,
        };

        let mut features = vec![x];
        let mut incidence = Vec::with_capacity(self.cfg.heads);
        for k in 0..self.cfg.heads {
            let hp = Self::head_prefix(k);
            let h = match &self.cfg.mode {
                IncidenceMode::Mlp { hyperedges } => {
                    let spec = generator_spec(self.cfg.embed_dim, *hyperedges)?;
                    mlp_incidence_on_tape(tape, &spec, params, &format!("{hp}.gen"), x)?
                }
                IncidenceMode::Attention => {
                    let wq = tape.param(params, &format!("{hp}.wq"));
                    let wk = tape.param(params, &format!("{hp}.wk"));
                    attention_incidence_on_tape(tape, x, wq, wk, batch)
                }
                IncidenceMode::Static { .. } => static_h.expect("static mode"),
            };
            incidence.push(h);
            let log_w = tape.param(params, &format!("{hp}.log_w"));
            let w = tape.exp(log_w);
            let p0 = tape.param(params, &format!("{hp}.conv0"));
            let p1 = tape.param(params, &format!("{hp}.conv1"));
            let l1 = convolve_on_tape(tape, x, h, w, p0, Activation::Relu, batch);
            let l2 = convolve_on_tape(tape, l1, h, w, p1, Activation::Identity, batch);
            features.push(l2);
        }
        let mut cat = tape.concat_cols(&features);
        if let Some(i) = only {
            cat = tape.select_rows(cat, (0..batch).map(|b| b * n + i).collect());
        }
        let q = mlp_forward(tape, &self.q_spec(), params, "critic.q", cat)?;
        Ok(CriticGraph {
            q,
            incidence,
            batch,
        })
    }

    /// `Q` for a batch, as a `B x N` matrix.
    pub fn q_batch<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        samples: &[(&[Vec<T>], &[usize])],
    ) -> Result<Array2<T>> {
        let mut tape = Tape::new();
        let g = self.record(&mut tape, params, samples)?;
        let n = self.layout.n_agents();
        Ok(tape
            .value(g.q)
            .clone()
            .into_shape_with_order((g.batch, n))
            .expect("q reshapes to B x N"))
    }

    pub fn critic_forward<T: Scalar>(
        &self,
        inp: &CriticInput<T>,
        params: &ParamStore<T>,
    ) -> Result<CriticOutput<T>> {
        let mut tape = Tape::new();
        let g = self.record(&mut tape, params, &[(&inp.obs, &inp.actions)])?;
        let q = tape.value(g.q).column(0).to_vec();
        let incidence_per_head = g
            .incidence
            .iter()
            .map(|&h| IncidenceMatrix::new(tape.value(h).clone()))
            .collect::<Result<_>>()?;
        Ok(CriticOutput {
            q,
            incidence_per_head,
        })
    }

    /// `Q_agent` for every action of `agent`, other agents' actions fixed.
    /// Each entry is a full critic evaluation: the incidence matrices depend
    /// on the substituted action.
    pub fn counterfactual_q<T: Scalar>(
        &self,
        inp: &CriticInput<T>,
        agent: usize,
        params: &ParamStore<T>,
    ) -> Result<Vec<T>> {
        if agent >= self.layout.n_agents() {
            return Err(config_err(format!("no agent {agent}")));
        }
        let mut actions = inp.actions.clone();
        (0..self.layout.spec(agent).n_actions)
            .map(|a| {
                actions[agent] = a;
                let mut tape = Tape::new();
                let g = self.record(&mut tape, params, &[(&inp.obs, &actions)])?;
                Ok(tape.value(g.q)[[agent, 0]])
            })
            .collect()
    }

    /// Batched counterfactuals: entry `(b, a)` is `Q_agent` of sample `b`
    /// with the agent's action replaced by `a`.
    pub fn counterfactual_batch<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        samples: &[(&[Vec<T>], &[usize])],
        agent: usize,
    ) -> Result<Array2<T>> {
        let n_act = self.layout.spec(agent).n_actions;
        let subs: Vec<Vec<usize>> = samples
            .iter()
            .flat_map(|(_, acts)| {
                (0..n_act).map(move |a| {
                    let mut v = acts.to_vec();
                    v[agent] = a;
                    v
                })
            })
            .collect();
        let expanded: Vec<(&[Vec<T>], &[usize])> = samples
            .iter()
            .flat_map(|(obs, _)| std::iter::repeat_n(*obs, n_act))
            .zip(subs.iter().map(Vec::as_slice))
            .collect();
        let mut tape = Tape::new();
        let g = self.record_agent(&mut tape, params, &expanded, agent)?;
        Ok(tape
            .value(g.q)
            .clone()
            .into_shape_with_order((samples.len(), n_act))
            .expect("counterfactual reshape"))
    }
}
