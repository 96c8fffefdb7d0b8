//! Reference returns of uniform-random and scripted greedy policies.

use hgac::envs::{scripted, ScenarioConfig, World};
use hgac::learner::derive_seed;
use hgac::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MIN_EPISODES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub mean: f64,
    /// Population standard deviation of episodic team returns.
    pub std: f64,
    pub episodes: usize,
}

impl ReturnStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len().max(1) as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            episodes: xs.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub random: ReturnStats,
    pub greedy: ReturnStats,
}

impl BaselineReport {
    /// Mean team return at `fraction` of the way from random to greedy.
    pub fn threshold(&self, fraction: f64) -> f64 {
        self.random.mean + fraction * (self.greedy.mean - self.random.mean)
    }
}

/// Episodic team returns of both reference policies. Episodes are split
/// evenly over `seeds`, with at least [`MIN_EPISODES`] in total; each seed
/// drives its own world and action streams.
pub fn eval_baselines(env: &ScenarioConfig, seeds: &[u64], horizon: usize, episodes: usize) -> Result<BaselineReport> {
    let seeds: Vec<u64> = if seeds.is_empty() { vec![0] } else { seeds.to_vec() };
    let per_seed = episodes.max(MIN_EPISODES).div_ceil(seeds.len());
    let (mut random, mut greedy) = (Vec::new(), Vec::new());
    for &seed in &seeds {
        for (out, scripted_greedy) in [(&mut random, false), (&mut greedy, true)] {
            let mut world = World::new(env.clone(), horizon, derive_seed(seed, 1_000))?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1_001));
            for _ in 0..per_seed {
                world.reset();
                let mut ret = 0.0;
                for _ in 0..horizon {
                    let a = if scripted_greedy {
                        scripted::greedy_actions(&world)
                    } else {
                        scripted::random_actions(&world, &mut rng)
                    };
                    ret += world.step(&a)?.rewards.iter().sum::<f64>();
                }
                out.push(ret);
            }
        }
    }
    Ok(BaselineReport {
        scenario: env.name.clone(),
        seeds,
        horizon,
        random: ReturnStats::from_samples(&random),
        greedy: ReturnStats::from_samples(&greedy),
    })
}
