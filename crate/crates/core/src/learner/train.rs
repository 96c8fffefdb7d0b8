use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::replay::{ReplayBuffer, Transition};
use super::update::{compute_targets, critic_loss, policy_gradient};
use crate::agents::{Actors, AgentLayout, Critic, CriticConfig, IncidenceMode};
use crate::approximator::{adam_step, polyak_update, OptimizerState, ParamStore};
use crate::envs::{agent_specs, ScenarioConfig, World};
use crate::error::{config_err, Error, Result};
use crate::scalar::Scalar;

/// Name prefix under which target networks are stored in a checkpoint.
pub const TARGET_PREFIX: &str = "target.";

/// The three critic variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// MLP-generated soft incidence.
    Hgac,
    /// Attention-generated incidence.
    AttHgac,
    /// Fixed hypergraph from the scenario's `static_groups`.
    HgacCon,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Hgac, Algorithm::AttHgac, Algorithm::HgacCon];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hgac => "hgac",
            Algorithm::AttHgac => "att-hgac",
            Algorithm::HgacCon => "hgac-con",
        }
    }

    /// Default critic for this variant; the MLP variant uses one hyperedge
    /// per agent.
    pub fn critic_config(self, env: &ScenarioConfig) -> Result<CriticConfig> {
        let mode = match self {
            Algorithm::Hgac => IncidenceMode::Mlp {
                hyperedges: env.n_agents(),
            },
            Algorithm::AttHgac => IncidenceMode::Attention,
            Algorithm::HgacCon => IncidenceMode::Static {
                groups: env.static_groups.clone().ok_or_else(|| {
                    config_err(format!("scenario `{}` defines no static_groups", env.name))
                })?,
            },
        };
        Ok(CriticConfig::new(mode))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| config_err(format!("unknown algorithm `{s}` (hgac, att-hgac, hgac-con)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub entropy: f64,
}

/// Online and target networks plus their optimizers.
#[derive(Debug, Clone)]
pub struct Learner<T> {
    cfg: TrainConfig,
    actors: Actors,
    critic: Critic,
    actor_params: ParamStore<T>,
    critic_params: ParamStore<T>,
    target_actor_params: ParamStore<T>,
    target_critic_params: ParamStore<T>,
    actor_opt: OptimizerState<T>,
    critic_opt: OptimizerState<T>,
    rng: ChaCha8Rng,
    updates: usize,
}

/// Independent seed for stream `k` of a run.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (k.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<T: Scalar> Learner<T> {
    pub fn new(env: &ScenarioConfig, cfg: TrainConfig, critic_cfg: CriticConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = AgentLayout::new(agent_specs(env))?;
        let actors = Actors::new(layout.clone());
        let critic = Critic::new(critic_cfg, layout)?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
        let actor_params = actors.init_params(&mut init_rng)?;
        let critic_params = critic.init_params(&mut init_rng)?;
        Ok(Self {
            actor_opt: OptimizerState::new(&actor_params, cfg.actor_adam()),
            critic_opt: OptimizerState::new(&critic_params, cfg.critic_adam()),
            target_actor_params: actor_params.detached_clone(),
            target_critic_params: critic_params.detached_clone(),
            actor_params,
            critic_params,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1)),
            cfg,
            actors,
            critic,
            updates: 0,
        })
    }

    pub fn for_algorithm(env: &ScenarioConfig, cfg: TrainConfig, algo: Algorithm) -> Result<Self> {
        let critic_cfg = algo.critic_config(env)?;
        Self::new(env, cfg, critic_cfg)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }
    pub fn actors(&self) -> &Actors {
        &self.actors
    }
    pub fn critic(&self) -> &Critic {
        &self.critic
    }
    pub fn actor_params(&self) -> &ParamStore<T> {
        &self.actor_params
    }
    pub fn critic_params(&self) -> &ParamStore<T> {
        &self.critic_params
    }
    pub fn target_actor_params(&self) -> &ParamStore<T> {
        &self.target_actor_params
    }
    pub fn target_critic_params(&self) -> &ParamStore<T> {
        &self.target_critic_params
    }
    pub fn updates(&self) -> usize {
        self.updates
    }

    /// One critic step, one actor step, then Polyak averaging of both
    /// target networks.
    pub fn update(&mut self, buffer: &ReplayBuffer<T>) -> Result<UpdateStats> {
        let batch = buffer.sample(self.cfg.batch_size, &mut self.rng)?;
        let targets = compute_targets(
            &batch,
            &self.critic,
            &self.target_critic_params,
            &self.actors,
            &self.target_actor_params,
            self.cfg.gamma,
            self.cfg.omega,
            &mut self.rng,
        )?;
        let closs = critic_loss(&batch, &self.critic, &mut self.critic_params, &targets)?;
        adam_step(&mut self.critic_params, &mut self.critic_opt)?;

        let stats = policy_gradient(
            &batch,
            &self.critic,
            &self.critic_params,
            &self.actors,
            &mut self.actor_params,
            self.cfg.omega,
            &mut self.rng,
        )?;
        adam_step(&mut self.actor_params, &mut self.actor_opt)?;

        polyak_update(&mut self.target_critic_params, &self.critic_params, self.cfg.tau)?;
        polyak_update(&mut self.target_actor_params, &self.actor_params, self.cfg.tau)?;
        self.updates += 1;
        Ok(UpdateStats {
            critic_loss: closs.as_f64(),
            actor_loss: stats.loss.as_f64(),
            entropy: stats.entropy.as_f64(),
        })
    }

    /// All four networks in one store; targets carry [`TARGET_PREFIX`].
    pub fn checkpoint_store(&self) -> Result<ParamStore<T>> {
        let mut out = ParamStore::new();
        for (store, prefix) in [
            (&self.actor_params, ""),
            (&self.critic_params, ""),
            (&self.target_actor_params, TARGET_PREFIX),
            (&self.target_critic_params, TARGET_PREFIX),
        ] {
            for (name, p) in store.iter() {
                out.insert(format!("{prefix}{name}"), p.value().clone())?;
            }
        }
        Ok(out)
    }

    /// Overwrites network weights from a store produced by
    /// [`Learner::checkpoint_store`]. Optimizer moments are left as they are.
    pub fn restore(&mut self, store: &ParamStore<T>) -> Result<()> {
        let expected = self.actor_params.len()
            + self.critic_params.len()
            + self.target_actor_params.len()
            + self.target_critic_params.len();
        if store.len() != expected {
            return Err(config_err(format!(
                "checkpoint has {} tensors, learner expects {expected}",
                store.len()
            )));
        }
        for (dest, prefix) in [
            (&mut self.actor_params, ""),
            (&mut self.critic_params, ""),
            (&mut self.target_actor_params, TARGET_PREFIX),
            (&mut self.target_critic_params, TARGET_PREFIX),
        ] {
            let names: Vec<String> = dest.names().map(str::to_string).collect();
            for name in names {
                let key = format!("{prefix}{name}");
                let v = store
                    .value(&key)
                    .ok_or_else(|| config_err(format!("checkpoint lacks `{key}`")))?;
                dest.set_value(&name, v.clone())?;
            }
        }
        Ok(())
    }
}

/// Everything collected from one episode.
#[derive(Debug, Clone)]
pub struct EpisodeRecord<T> {
    pub transitions: Vec<Transition<T>>,
    pub agent_returns: Vec<f64>,
    /// Mean policy entropy over steps and agents.
    pub entropy: f64,
}

fn to_scalar<T: Scalar>(obs: Vec<Vec<f64>>) -> Vec<Vec<T>> {
    obs.into_iter()
        .map(|o| o.into_iter().map(T::lit).collect())
        .collect()
}

/// Plays one episode of `world` with actions sampled from the actors.
pub fn run_episode<T: Scalar>(
    world: &mut World,
    actors: &Actors,
    params: &ParamStore<T>,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeRecord<T>> {
    let n = world.n_agents();
    let mut obs: Vec<Vec<T>> = to_scalar(world.reset());
    let mut transitions = Vec::with_capacity(world.horizon());
    let mut returns = vec![0.0; n];
    let mut entropy = 0.0;
    for _ in 0..world.horizon() {
        let pis = actors.joint_policy(params, &obs)?;
        let actions: Vec<usize> = pis.iter().map(|p| p.sample(rng)).collect();
        entropy += pis.iter().map(|p| p.entropy().as_f64()).sum::<f64>();
        let step = world.step(&actions)?;
        for (ret, r) in returns.iter_mut().zip(&step.rewards) {
            *ret += r;
        }
        let next: Vec<Vec<T>> = to_scalar(step.obs);
        transitions.push(Transition {
            obs: std::mem::replace(&mut obs, next.clone()),
            actions,
            rewards: step.rewards.into_iter().map(T::lit).collect(),
            next_obs: next,
            // The horizon is a time limit, not a terminal state.
            done: false,
        });
    }
    Ok(EpisodeRecord {
        transitions,
        agent_returns: returns,
        entropy: entropy / (world.horizon() * n) as f64,
    })
}

/// Per-episode training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub team_return: f64,
    pub agent_returns: Vec<f64>,
    /// Loss of the most recent update; NaN before the first update.
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub entropy: f64,
    /// Wall-clock seconds since training started.
    pub seconds: f64,
}

pub struct TrainReport<T> {
    pub learner: Learner<T>,
    pub metrics: Vec<EpisodeMetrics>,
}

struct Worker {
    world: World,
    rng: ChaCha8Rng,
}

/// Trains `learner` for `cfg.total_episodes` episodes.
///
/// Each round, every rollout worker plays one episode with its own world
/// and RNG stream; transitions enter the buffer in worker order, so a run
/// is reproducible for a fixed seed and worker count. After each
/// `steps_per_update` environment steps, `updates_per_cycle` updates run
/// once the buffer holds a full batch. `observer` sees every episode in
/// order and may abort training by returning an error.
pub fn train_loop<T, F>(mut learner: Learner<T>, env: &ScenarioConfig, mut observer: F) -> Result<TrainReport<T>>
where
    T: Scalar,
    F: FnMut(&EpisodeMetrics, &Learner<T>) -> Result<()>,
{
    let cfg = learner.cfg.clone();
    let mut workers = (0..cfg.rollout_workers)
        .map(|w| {
            let k = 2 + 2 * w as u64;
            Ok(Worker {
                world: World::new(env.clone(), cfg.episode_length, derive_seed(cfg.seed, k))?,
                rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, k + 1)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let start = Instant::now();
    let mut metrics = Vec::with_capacity(cfg.total_episodes);
    let mut steps = 0usize;
    let mut last = UpdateStats {
        critic_loss: f64::NAN,
        actor_loss: f64::NAN,
        entropy: f64::NAN,
    };

    while metrics.len() < cfg.total_episodes {
        let round = (cfg.total_episodes - metrics.len()).min(workers.len());
        let first_episode = metrics.len();
        let records: Vec<Result<EpisodeRecord<T>>> = {
            let (actors, params) = (&learner.actors, &learner.actor_params);
            let active = &mut workers[..round];
            if round == 1 {
                active
                    .iter_mut()
                    .map(|w| run_episode(&mut w.world, actors, params, &mut w.rng))
                    .collect()
            } else {
                std::thread::scope(|s| {
                    let handles: Vec<_> = active
                        .iter_mut()
                        .map(|w| s.spawn(move || run_episode(&mut w.world, actors, params, &mut w.rng)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("rollout worker panicked"))
                        .collect()
                })
            }
        };
        let mut done_records = Vec::with_capacity(round);
        for (k, rec) in records.into_iter().enumerate() {
            let rec = rec.map_err(|e| Error::Episode {
                episode: first_episode + k,
                source: Box::new(e),
            })?;
            for t in &rec.transitions {
                buffer.push(t.clone())?;
            }
            done_records.push(rec);
        }

        let before = steps;
        steps += round * cfg.episode_length;
        let cycles = steps / cfg.steps_per_update - before / cfg.steps_per_update;
        if buffer.len() >= cfg.batch_size {
            for _ in 0..cycles * cfg.updates_per_cycle {
                last = learner.update(&buffer)?;
            }
        }

        for rec in done_records {
            let m = EpisodeMetrics {
                episode: metrics.len(),
                team_return: rec.agent_returns.iter().sum(),
                agent_returns: rec.agent_returns,
                critic_loss: last.critic_loss,
                actor_loss: last.actor_loss,
                entropy: rec.entropy,
                seconds: start.elapsed().as_secs_f64(),
            };
            observer(&m, &learner)?;
            metrics.push(m);
        }
    }
    Ok(TrainReport { learner, metrics })
}
