//! Independent reference computations shared by the integration tests.
//! Everything here is written with plain loops or dense matrices so that it
//! shares no code path with the engine.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hgac::agents::{AgentLayout, Critic, CriticConfig, IncidenceMode};
use hgac::approximator::ParamStore;
use hgac::learner::{critic_loss, Transition};
use hgac::envs::{agent_specs, builtin, AgentSpec, Role};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Dv^-1/2 H W De^-1 H^T Dv^-1/2 X P` as five explicit dense products,
/// with degrees floored at `eps` before inversion.
pub fn conv_oracle(x: &Array2<f64>, h: &Array2<f64>, w: &[f64], p: &Array2<f64>, eps: f64) -> Array2<f64> {
    let (n, m) = h.dim();
    let mut dv = Array2::<f64>::zeros((n, n));
    for v in 0..n {
        let mut d = 0.0;
        for e in 0..m {
            d += w[e] * h[[v, e]];
        }
        dv[[v, v]] = 1.0 / d.max(eps).sqrt();
    }
    let mut de = Array2::<f64>::zeros((m, m));
    let mut wd = Array2::<f64>::zeros((m, m));
    for e in 0..m {
        let mut d = 0.0;
        for v in 0..n {
            d += h[[v, e]];
        }
        de[[e, e]] = 1.0 / d.max(eps);
        wd[[e, e]] = w[e];
    }
    dv.dot(h).dot(&wd).dot(&de).dot(&h.t()).dot(&dv).dot(x).dot(p)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(lo..hi))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| rng.gen_range(lo..hi))
}

/// `max |a - b| / max(|b|, floor)` over all entries.
pub fn max_rel_err(a: &Array2<f64>, b: &Array2<f64>, floor: f64) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor))
        .fold(0.0, f64::max)
}

/// Central difference of `f` with respect to entry `(r, c)` of parameter
/// `name`.
pub fn central_difference(
    store: &mut ParamStore<f64>,
    name: &str,
    r: usize,
    c: usize,
    step: f64,
    mut f: impl FnMut(&ParamStore<f64>) -> f64,
) -> f64 {
    let orig = store.value(name).unwrap()[[r, c]];
    store.value_mut(name).unwrap()[[r, c]] = orig + step;
    let up = f(store);
    store.value_mut(name).unwrap()[[r, c]] = orig - step;
    let down = f(store);
    store.value_mut(name).unwrap()[[r, c]] = orig;
    (up - down) / (2.0 * step)
}

/// A small heterogeneous layout: `n_a` agents of one role and `n_b` of
/// another, with distinct observation and action sizes.
pub fn toy_layout(n_a: usize, n_b: usize) -> AgentLayout {
    let mut specs = vec![
        AgentSpec {
            role: Role::Hunter,
            obs_dim: 3,
            n_actions: 4,
        };
        n_a
    ];
    specs.extend(std::iter::repeat_n(AgentSpec {
        role: Role::Bank,
        obs_dim: 2,
        n_actions: 3,
    }, n_b));
    AgentLayout::new(specs).unwrap()
}

pub fn scenario_layout(name: &str) -> AgentLayout {
    AgentLayout::new(agent_specs(&builtin(name).unwrap())).unwrap()
}

/// A deliberately narrow critic so that finite-difference sweeps stay fast.
pub fn small_critic(layout: AgentLayout, mode: IncidenceMode, heads: usize) -> Critic {
    let mut cfg = CriticConfig::new(mode);
    cfg.heads = heads;
    cfg.embed_dim = 6;
    cfg.attn_dim = 5;
    cfg.conv_hidden = 5;
    cfg.conv_out = 4;
    cfg.q_hidden = 7;
    Critic::new(cfg, layout).unwrap()
}

/// Random joint sample for `layout`.
pub fn random_sample(rng: &mut ChaCha8Rng, layout: &AgentLayout) -> (Vec<Vec<f64>>, Vec<usize>) {
    let obs = layout
        .specs()
        .iter()
        .map(|s| (0..s.obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let acts = layout.specs().iter().map(|s| rng.gen_range(0..s.n_actions)).collect();
    (obs, acts)
}

/// Adds `N(0, scale)`-ish noise to every parameter so that nothing sits at
/// its (zero) initial value.
pub fn jitter(store: &mut ParamStore<f64>, rng: &mut ChaCha8Rng, scale: f64) {
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for n in names {
        store
            .value_mut(&n)
            .unwrap()
            .mapv_inplace(|v| v + rng.gen_range(-scale..scale));
    }
}

// Finite-difference sweep over the critic.

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
pub const FD_PROBES: usize = 20;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Parameter tensors of all heads that play the same role form one group.
fn group_of(name: &str) -> String {
    name.split('.')
        .map(|part| if part.starts_with("head") { "head*" } else { part })
        .collect::<Vec<_>>()
        .join(".")
}

fn batch(rng: &mut ChaCha8Rng, critic: &Critic, b: usize) -> Vec<Transition<f64>> {
    (0..b)
        .map(|_| {
            let (obs, actions) = random_sample(rng, critic.layout());
            let n = actions.len();
            Transition {
                next_obs: obs.clone(),
                obs,
                actions,
                rewards: vec![0.0; n],
                done: false,
            }
        })
        .collect()
}

fn loss_value(critic: &Critic, params: &ParamStore<f64>, batch: &[Transition<f64>], y: &Array2<f64>) -> f64 {
    let samples: Vec<(&[Vec<f64>], &[usize])> =
        batch.iter().map(|t| (t.obs.as_slice(), t.actions.as_slice())).collect();
    let q = critic.q_batch(params, &samples).unwrap();
    (&q - y).mapv(|d| d * d).sum() / batch.len() as f64
}

pub fn critic_gradient_report(mode: IncidenceMode, seed: u64) -> BTreeMap<String, (usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let critic = small_critic(toy_layout(3, 2), mode, 2);
    let mut params = critic.init_params::<f64, _>(&mut rng).unwrap();
    jitter(&mut params, &mut rng, 0.3);
    let batch = batch(&mut rng, &critic, 3);
    let refs: Vec<&Transition<f64>> = batch.iter().collect();
    let y = Array2::from_shape_fn((3, 5), |_| rng.gen_range(-1.0..1.0));
    critic_loss(&refs, &critic, &mut params, &y).unwrap();
    let analytic = params.clone();

    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for name in params.names() {
        groups.entry(group_of(name)).or_default().push(name.to_string());
    }
    let mut report = BTreeMap::new();
    for (group, names) in groups {
        let mut worst = 0.0f64;
        for _ in 0..FD_PROBES {
            let name = &names[rng.gen_range(0..names.len())];
            let (r, c) = params.value(name).unwrap().dim();
            let (r, c) = (rng.gen_range(0..r), rng.gen_range(0..c));
            let fd = central_difference(&mut params, name, r, c, FD_STEP, |p| loss_value(&critic, p, &batch, &y));
            let g = analytic.grad(name).unwrap()[[r, c]];
            worst = worst.max(rel_err(g, fd));
        }
        report.insert(group, (FD_PROBES, worst));
    }
    report
}

