use std::path::{Path, PathBuf};

use hgac::approximator::{load_checkpoint, save_checkpoint};
use hgac::envs::{Role, ScenarioConfig, ScenarioKind, World};
use hgac::learner::{derive_seed, run_episode, train_loop, Learner, Transition};
use hgac::{Error, Result, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, ScalarKind};
use crate::incidence::{dump_incidence, is_permutation, mean_incidence, rover_tower_assignment};
use crate::manifest::{FileDigest, RunManifest};
use crate::metrics::{read_team_returns, MetricsWriter};
use crate::plot::{curve_svg, SMOOTHING_WINDOW};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CURVE_FILE: &str = "curve.svg";
pub const HEATMAP_DIR: &str = "heatmaps";

/// Trains as configured and writes metrics, heatmaps, checkpoint, curve and
/// manifest into `cfg.out_dir`.
pub fn run(cfg: RunConfig) -> Result<RunManifest> {
    let (cfg, env) = cfg.finalize()?;
    match cfg.scalar {
        ScalarKind::F32 => run_typed::<f32>(cfg, env),
        ScalarKind::F64 => run_typed::<f64>(cfg, env),
    }
}

fn run_typed<T: Scalar>(cfg: RunConfig, env: ScenarioConfig) -> Result<RunManifest> {
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(dir.join(HEATMAP_DIR))?;
    let learner = Learner::<T>::for_algorithm(&env, cfg.train.clone(), cfg.algo)?;
    let mut writer = MetricsWriter::create(&dir.join(METRICS_FILE), env.n_agents(), cfg.deterministic)?;
    let probe_seed = cfg.train.seed;
    let report = train_loop(learner, &env, |m, l| {
        writer.write(m)?;
        if cfg.heatmap_every > 0 && (m.episode + 1) % cfg.heatmap_every == 0 {
            let probe = probe_episode(&env, l, probe_seed)?;
            dump_incidence(
                l.critic(),
                l.critic_params(),
                &probe.transitions,
                &dir.join(HEATMAP_DIR),
                &format!("ep{:06}", m.episode + 1),
            )?;
        }
        Ok(())
    })?;
    writer.finish()?;
    let learner = report.learner;

    let probe = probe_episode(&env, &learner, probe_seed)?;
    dump_incidence(
        learner.critic(),
        learner.critic_params(),
        &probe.transitions,
        &dir.join(HEATMAP_DIR),
        "final",
    )?;
    save_checkpoint(&learner.checkpoint_store()?, &dir.join(CHECKPOINT_FILE))?;

    let returns: Vec<f64> = report.metrics.iter().map(|m| m.team_return).collect();
    let title = format!("{} / {} / seed {}", env.name, cfg.algo, cfg.train.seed);
    std::fs::write(dir.join(CURVE_FILE), curve_svg(&title, &returns, SMOOTHING_WINDOW))?;

    let manifest = RunManifest {
        tool: concat!("hgac-harness ", env!("CARGO_PKG_VERSION")).to_string(),
        episodes: report.metrics.len(),
        updates: learner.updates(),
        checkpoint: FileDigest::of(&dir, CHECKPOINT_FILE)?,
        metrics: FileDigest::of(&dir, METRICS_FILE)?,
        scenario: env,
        config: cfg,
    };
    manifest.write(&dir)?;
    Ok(manifest)
}

/// One evaluation episode with the current actors, from streams fixed by
/// `seed`, together with the episode's RT pairing (empty elsewhere).
pub struct Probe<T> {
    pub transitions: Vec<Transition<T>>,
    pub pairing: Vec<usize>,
}

pub fn probe_episode<T: Scalar>(env: &ScenarioConfig, learner: &Learner<T>, seed: u64) -> Result<Probe<T>> {
    let mut world = World::new(env.clone(), learner.config().episode_length, derive_seed(seed, 2_000))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2_001));
    let rec = run_episode(&mut world, learner.actors(), learner.actor_params(), &mut rng)?;
    Ok(Probe {
        transitions: rec.transitions,
        pairing: world.state.pairing.clone(),
    })
}

/// Rebuilds the learner of a finished run from its manifest and checkpoint.
pub fn load_learner<T: Scalar>(dir: &Path) -> Result<(RunManifest, Learner<T>)> {
    let manifest = RunManifest::read(dir)?;
    let mut learner = Learner::<T>::for_algorithm(&manifest.scenario, manifest.config.train.clone(), manifest.config.algo)?;
    learner.restore(&load_checkpoint(&dir.join(CHECKPOINT_FILE))?)?;
    Ok((manifest, learner))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    /// Rover `r` is paired with tower `pairing[r]`.
    pub pairing: Vec<usize>,
    /// Per head, the argmax tower of each rover row.
    pub per_head: Vec<Vec<usize>>,
    /// Per head: the assignment is a permutation equal to the pairing.
    pub head_matches: Vec<bool>,
}

impl PairingReport {
    pub fn matching_heads(&self) -> usize {
        self.head_matches.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpReport {
    pub files: Vec<PathBuf>,
    pub pairing: Option<PairingReport>,
}

/// Dumps per-head incidence heatmaps of a finished run, averaged over one
/// probe episode drawn with `seed`, into `out`. For rover-tower scenarios
/// also reads off the rover-tower assignment of every head.
pub fn dump_run_incidence(dir: &Path, seed: u64, out: &Path) -> Result<DumpReport> {
    let (manifest, learner) = load_learner::<f64>(dir)?;
    let env = &manifest.scenario;
    let probe = probe_episode(env, &learner, seed)?;
    let files = dump_incidence(learner.critic(), learner.critic_params(), &probe.transitions, out, &format!("seed{seed}"))?;
    let pairing = match env.kind {
        ScenarioKind::Rt { .. } => {
            let roles: Vec<Role> = learner.actors().layout().specs().iter().map(|s| s.role).collect();
            let per_head: Vec<Vec<usize>> = mean_incidence(learner.critic(), learner.critic_params(), &probe.transitions)?
                .iter()
                .map(|m| rover_tower_assignment(m, &roles))
                .collect();
            let head_matches = per_head
                .iter()
                .map(|a| is_permutation(a) && *a == probe.pairing)
                .collect();
            Some(PairingReport {
                pairing: probe.pairing,
                per_head,
                head_matches,
            })
        }
        _ => None,
    };
    Ok(DumpReport { files, pairing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub metrics_identical: bool,
    /// Metrics equal once the wall-clock column is dropped.
    pub metrics_identical_ignoring_time: bool,
    pub checkpoint_identical: bool,
    pub replay_dir: PathBuf,
}

impl ReplayReport {
    pub fn reproduced(&self) -> bool {
        self.metrics_identical_ignoring_time && self.checkpoint_identical
    }
}

fn strip_seconds(text: &str) -> String {
    text.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Re-executes the run recorded in `dir` into `<dir>/replay` and compares
/// the outputs.
pub fn replay_check(dir: &Path) -> Result<ReplayReport> {
    let manifest = RunManifest::read(dir)?;
    let mut cfg = manifest.config.clone();
    let replay_dir = dir.join("replay");
    cfg.out_dir = replay_dir.clone();
    let again = run(cfg)?;
    let (a, b) = (
        std::fs::read_to_string(dir.join(METRICS_FILE))?,
        std::fs::read_to_string(replay_dir.join(METRICS_FILE))?,
    );
    Ok(ReplayReport {
        metrics_identical: a == b,
        metrics_identical_ignoring_time: strip_seconds(&a) == strip_seconds(&b),
        checkpoint_identical: again.checkpoint.git_blob_sha1 == manifest.checkpoint.git_blob_sha1,
        replay_dir,
    })
}

/// Mean team return over the last `window` episodes of a run.
pub fn final_mean_return(dir: &Path, window: usize) -> Result<f64> {
    let r = read_team_returns(&dir.join(METRICS_FILE))?;
    if r.is_empty() {
        return Err(Error::InsufficientData { have: 0, need: 1 });
    }
    let tail = &r[r.len().saturating_sub(window)..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}
