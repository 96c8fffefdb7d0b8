//! Markov-game interface and three simplified cooperative particle worlds.
//!
//! Agents live in the arena `[-1, 1]^2` and move by direct displacement: one
//! of five actions `{noop, +x, -x, +y, -y}` shifts the agent by `step_size`,
//! clamped to the arena. There is no velocity or inertia. Episodes have no
//! terminal states; the horizon is a time limit enforced by the world.

pub mod config;
pub mod scripted;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{builtin, ScenarioConfig, ScenarioKind, BUILTIN_NAMES};

use crate::error::{Error, Result};

pub const DEFAULT_HORIZON: usize = 25;
pub const MOVE_ACTIONS: usize = 5;
pub const ARENA: f64 = 1.0;

pub type Pos = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Hunter,
    Bank,
    Rover,
    Tower,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Hunter => "hunter",
            Role::Bank => "bank",
            Role::Rover => "rover",
            Role::Tower => "tower",
        }
    }
}

/// Shape of one agent's observation and action set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub role: Role,
    pub obs_dim: usize,
    pub n_actions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Treasure {
    pub pos: Pos,
    pub color: usize,
    pub alive: bool,
}

/// Complete simulator state apart from the RNG stream, which lives on
/// [`World`].
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub agent_pos: Vec<Pos>,
    pub roles: Vec<Role>,
    pub landmarks: Vec<Pos>,
    pub treasures: Vec<Treasure>,
    /// CTC: treasure color carried by each agent.
    pub carrying: Vec<Option<usize>>,
    /// RT: `pairing[r]` is the tower index (0-based among towers) of rover `r`.
    pub pairing: Vec<usize>,
    /// RT: goal landmark of rover `r`.
    pub goals: Vec<usize>,
    /// RT: last message sent by each tower.
    pub messages: Vec<Option<usize>>,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub info: BTreeMap<String, f64>,
}

/// One scenario instance with its own RNG stream.
#[derive(Debug, Clone)]
pub struct World {
    cfg: ScenarioConfig,
    horizon: usize,
    rng: ChaCha8Rng,
    pub state: WorldState,
}

fn dist(a: Pos, b: Pos) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn clamp_arena(p: Pos) -> Pos {
    [p[0].clamp(-ARENA, ARENA), p[1].clamp(-ARENA, ARENA)]
}

fn displaced(p: Pos, action: usize, step: f64) -> Pos {
    let d = match action {
        1 => [step, 0.0],
        2 => [-step, 0.0],
        3 => [0.0, step],
        4 => [0.0, -step],
        _ => [0.0, 0.0],
    };
    clamp_arena([p[0] + d[0], p[1] + d[1]])
}

fn one_hot(k: Option<usize>, n: usize, out: &mut Vec<f64>) {
    out.extend((0..n).map(|i| if Some(i) == k { 1.0 } else { 0.0 }));
}

fn push_rel(from: Pos, to: Pos, out: &mut Vec<f64>) {
    out.push(to[0] - from[0]);
    out.push(to[1] - from[1]);
}

impl World {
    /// Builds a world whose positions are sampled from `seed`. Equivalent to
    /// [`World::new`] followed by [`World::reset`].
    pub fn reset_with_seed(cfg: &ScenarioConfig, seed: u64) -> Result<(Self, Vec<Vec<f64>>)> {
        let mut w = Self::new(cfg.clone(), DEFAULT_HORIZON, seed)?;
        let obs = w.reset();
        Ok((w, obs))
    }

    pub fn new(cfg: ScenarioConfig, horizon: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_agents();
        let roles = match cfg.kind {
            ScenarioKind::Cn { hunters, .. } => vec![Role::Hunter; hunters],
            ScenarioKind::Ctc { hunters, banks, .. } => {
                let mut r = vec![Role::Hunter; hunters];
                r.extend(std::iter::repeat_n(Role::Bank, banks));
                r
            }
            ScenarioKind::Rt { rovers, .. } => {
                let mut r = vec![Role::Rover; rovers];
                r.extend(std::iter::repeat_n(Role::Tower, rovers));
                r
            }
        };
        let state = WorldState {
            agent_pos: vec![[0.0, 0.0]; n],
            roles,
            landmarks: Vec::new(),
            treasures: Vec::new(),
            carrying: vec![None; n],
            pairing: Vec::new(),
            goals: Vec::new(),
            messages: Vec::new(),
            step: 0,
        };
        Ok(Self {
            cfg,
            horizon,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_agents(&self) -> usize {
        self.state.roles.len()
    }

    fn sample_pos(&mut self) -> Pos {
        [self.rng.gen_range(-ARENA..ARENA), self.rng.gen_range(-ARENA..ARENA)]
    }

    /// Starts a new episode from this world's RNG stream.
    pub fn reset(&mut self) -> Vec<Vec<f64>> {
        let n = self.n_agents();
        self.state.step = 0;
        self.state.carrying = vec![None; n];
        self.state.agent_pos = (0..n).map(|_| self.sample_pos()).collect();
        match self.cfg.kind {
            ScenarioKind::Cn { landmarks, .. } => {
                self.state.landmarks = (0..landmarks).map(|_| self.sample_pos()).collect();
            }
            ScenarioKind::Ctc { banks, treasures, .. } => {
                self.state.treasures = (0..treasures)
                    .map(|t| Treasure {
                        pos: self.sample_pos(),
                        color: t % banks,
                        alive: true,
                    })
                    .collect();
            }
            ScenarioKind::Rt { rovers, landmarks } => {
                self.state.landmarks = (0..landmarks).map(|_| self.sample_pos()).collect();
                let mut pairing: Vec<usize> = (0..rovers).collect();
                rand::seq::SliceRandom::shuffle(pairing.as_mut_slice(), &mut self.rng);
                self.state.pairing = pairing;
                self.state.goals = (0..rovers).map(|_| self.rng.gen_range(0..landmarks)).collect();
                self.state.messages = vec![None; rovers];
            }
        }
        self.observations()
    }

    pub fn agent_specs(&self) -> Vec<AgentSpec> {
        agent_specs(&self.cfg)
    }

    /// Applies one simultaneous joint action.
    pub fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        let specs = self.agent_specs();
        if actions.len() != specs.len() {
            return Err(Error::Contract(format!(
                "{} actions for {} agents",
                actions.len(),
                specs.len()
            )));
        }
        for (i, (&a, s)) in actions.iter().zip(&specs).enumerate() {
            if a >= s.n_actions {
                return Err(Error::Contract(format!(
                    "agent {i} action {a} outside 0..{}",
                    s.n_actions
                )));
            }
        }
        if self.state.step >= self.horizon {
            return Err(Error::Contract(format!(
                "step {} past horizon {}",
                self.state.step, self.horizon
            )));
        }
        self.state.step += 1;
        let mut info = BTreeMap::new();
        let rewards = match self.cfg.kind {
            ScenarioKind::Cn { .. } => self.step_cn(actions, &mut info),
            ScenarioKind::Ctc { .. } => self.step_ctc(actions, &mut info),
            ScenarioKind::Rt { .. } => self.step_rt(actions, &mut info),
        };
        Ok(StepResult {
            obs: self.observations(),
            rewards,
            done: false,
            info,
        })
    }

    fn move_agents(&mut self, actions: &[usize], movable: impl Fn(Role) -> bool) {
        let step = self.cfg.step_size;
        for (i, &a) in actions.iter().enumerate() {
            if movable(self.state.roles[i]) {
                self.state.agent_pos[i] = displaced(self.state.agent_pos[i], a, step);
            }
        }
    }

    fn step_cn(&mut self, actions: &[usize], info: &mut BTreeMap<String, f64>) -> Vec<f64> {
        self.move_agents(actions, |_| true);
        let (cover, pairs) = cn_terms(&self.state, self.cfg.radius);
        let shared = -cover - self.cfg.collision_penalty() * pairs as f64;
        info.insert("cover_distance".into(), cover);
        info.insert("collisions".into(), pairs as f64);
        vec![shared; self.n_agents()]
    }

    #[allow(clippy::needless_range_loop)] // several parallel per-agent arrays
    fn step_ctc(&mut self, actions: &[usize], info: &mut BTreeMap<String, f64>) -> Vec<f64> {
        self.move_agents(actions, |_| true);
        let n = self.n_agents();
        let r = self.cfg.radius;
        let mut rewards = vec![0.0; n];
        let mut pickups = 0usize;
        for i in 0..n {
            if self.state.roles[i] != Role::Hunter || self.state.carrying[i].is_some() {
                continue;
            }
            let p = self.state.agent_pos[i];
            if let Some(t) = self
                .state
                .treasures
                .iter_mut()
                .find(|t| t.alive && dist(t.pos, p) < r)
            {
                t.alive = false;
                self.state.carrying[i] = Some(t.color);
                rewards[i] += self.cfg.pickup_bonus;
                pickups += 1;
            }
        }
        let banks: Vec<usize> = (0..n).filter(|&i| self.state.roles[i] == Role::Bank).collect();
        let mut deposits = 0usize;
        for i in 0..n {
            let Some(color) = self.state.carrying[i] else {
                continue;
            };
            let bank = banks[color];
            if dist(self.state.agent_pos[i], self.state.agent_pos[bank]) < r {
                self.state.carrying[i] = None;
                deposits += 1;
                let pos = self.sample_pos();
                if let Some(t) = self
                    .state
                    .treasures
                    .iter_mut()
                    .find(|t| !t.alive && t.color == color)
                {
                    t.pos = pos;
                    t.alive = true;
                }
            }
        }
        let global = self.cfg.deposit_bonus * deposits as f64;
        let penalty = self.cfg.collision_penalty();
        let mut collisions = 0usize;
        for i in 0..n {
            rewards[i] += global;
            for j in (i + 1)..n {
                // hunter-bank contact is how deposits happen, not a collision
                let (ri, rj) = (self.state.roles[i], self.state.roles[j]);
                if ri != rj && (ri == Role::Bank || rj == Role::Bank) {
                    continue;
                }
                if dist(self.state.agent_pos[i], self.state.agent_pos[j]) < r {
                    rewards[i] -= penalty;
                    rewards[j] -= penalty;
                    collisions += 1;
                }
            }
        }
        info.insert("pickups".into(), pickups as f64);
        info.insert("deposits".into(), deposits as f64);
        info.insert("collisions".into(), collisions as f64);
        rewards
    }

    fn step_rt(&mut self, actions: &[usize], info: &mut BTreeMap<String, f64>) -> Vec<f64> {
        let rovers = self.state.pairing.len();
        self.move_agents(actions, |role| role == Role::Rover);
        for t in 0..rovers {
            self.state.messages[t] = Some(actions[rovers + t]);
        }
        let mut rewards = vec![0.0; 2 * rovers];
        let mut total = 0.0;
        for r in 0..rovers {
            let d = dist(
                self.state.agent_pos[r],
                self.state.landmarks[self.state.goals[r]],
            );
            rewards[r] = -d;
            rewards[rovers + self.state.pairing[r]] = -d;
            total += d;
        }
        info.insert("goal_distance".into(), total);
        rewards
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.n_agents()).map(|i| self.observe(i)).collect()
    }

    fn observe(&self, i: usize) -> Vec<f64> {
        let s = &self.state;
        let me = s.agent_pos[i];
        let mut o = Vec::new();
        match self.cfg.kind {
            ScenarioKind::Cn { .. } => {
                o.extend_from_slice(&me);
                for (j, &p) in s.agent_pos.iter().enumerate() {
                    if j != i {
                        push_rel(me, p, &mut o);
                    }
                }
                for &l in &s.landmarks {
                    push_rel(me, l, &mut o);
                }
            }
            ScenarioKind::Ctc { hunters, banks, .. } => {
                o.extend_from_slice(&me);
                let tag = if s.roles[i] == Role::Bank {
                    Some(i - hunters)
                } else {
                    s.carrying[i]
                };
                one_hot(tag, banks, &mut o);
                for (j, &p) in s.agent_pos.iter().enumerate() {
                    if j != i {
                        push_rel(me, p, &mut o);
                    }
                }
                for t in &s.treasures {
                    push_rel(me, t.pos, &mut o);
                    one_hot(Some(t.color), banks, &mut o);
                    o.push(if t.alive { 1.0 } else { 0.0 });
                }
            }
            ScenarioKind::Rt { rovers, landmarks } => {
                if i < rovers {
                    one_hot(s.messages[s.pairing[i]], landmarks, &mut o);
                } else {
                    let tower = i - rovers;
                    let rover = s
                        .pairing
                        .iter()
                        .position(|&t| t == tower)
                        .expect("pairing is a permutation");
                    let rp = s.agent_pos[rover];
                    o.extend_from_slice(&rp);
                    for &l in &s.landmarks {
                        push_rel(rp, l, &mut o);
                    }
                    one_hot(Some(s.goals[rover]), landmarks, &mut o);
                }
            }
        }
        o
    }
}

/// Landmark cover distance and number of colliding hunter pairs.
pub(crate) fn cn_terms(s: &WorldState, radius: f64) -> (f64, usize) {
    let cover: f64 = s
        .landmarks
        .iter()
        .map(|&l| {
            s.agent_pos
                .iter()
                .map(|&p| dist(p, l))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    let mut pairs = 0;
    for i in 0..s.agent_pos.len() {
        for j in (i + 1)..s.agent_pos.len() {
            if dist(s.agent_pos[i], s.agent_pos[j]) < radius {
                pairs += 1;
            }
        }
    }
    (cover, pairs)
}

/// Observation and action shapes for every agent of a scenario.
pub fn agent_specs(cfg: &ScenarioConfig) -> Vec<AgentSpec> {
    match cfg.kind {
        ScenarioKind::Cn { hunters, landmarks } => vec![
            AgentSpec {
                role: Role::Hunter,
                obs_dim: 2 + 2 * (hunters - 1 + landmarks),
                n_actions: MOVE_ACTIONS,
            };
            hunters
        ],
        ScenarioKind::Ctc {
            hunters,
            banks,
            treasures,
        } => {
            let n = hunters + banks;
            let obs_dim = 2 + banks + 2 * (n - 1) + treasures * (3 + banks);
            let mut v = vec![
                AgentSpec {
                    role: Role::Hunter,
                    obs_dim,
                    n_actions: MOVE_ACTIONS,
                };
                hunters
            ];
            v.extend(std::iter::repeat_n(AgentSpec {
                role: Role::Bank,
                obs_dim,
                n_actions: MOVE_ACTIONS,
            }, banks));
            v
        }
        ScenarioKind::Rt { rovers, landmarks } => {
            let mut v = vec![
                AgentSpec {
                    role: Role::Rover,
                    obs_dim: landmarks,
                    n_actions: MOVE_ACTIONS,
                };
                rovers
            ];
            v.extend(std::iter::repeat_n(AgentSpec {
                role: Role::Tower,
                obs_dim: 2 + 3 * landmarks,
                n_actions: landmarks,
            }, rovers));
            v
        }
    }
}

/// Observation length of each agent.
pub fn observation_spec(cfg: &ScenarioConfig) -> Vec<usize> {
    agent_specs(cfg).iter().map(|s| s.obs_dim).collect()
}

/// Action-set size of each agent.
pub fn action_spec(cfg: &ScenarioConfig) -> Vec<usize> {
    agent_specs(cfg).iter().map(|s| s.n_actions).collect()
}
