use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hgac::learner::{Algorithm, TrainConfig};
use hgac_harness::config::{DEFAULT_OUT_ROOT, OUT_ROOT_VAR};
use hgac_harness::{dump_run_incidence, eval_baselines, replay_check, resolve_scenario, run, RunConfig, ScalarKind};

#[derive(Parser)]
#[command(name = "hgac", version, about = "Train and inspect hypergraph actor-critic agents")]
struct Cli {
    /// Root directory for run outputs.
    #[arg(long, global = true, env = OUT_ROOT_VAR, default_value = DEFAULT_OUT_ROOT)]
    out_root: PathBuf,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write metrics, heatmaps, checkpoint,
    /// curve and manifest.
    Run(RunArgs),
    /// Mean and standard deviation of random and scripted-greedy returns.
    EvalBaselines {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 500)]
        episodes: usize,
        #[arg(long, default_value_t = hgac::envs::DEFAULT_HORIZON)]
        episode_length: usize,
    },
    /// Per-head incidence CSVs of a finished run over one probe episode.
    DumpIncidence {
        /// Run directory containing manifest.json and checkpoint.bin.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (default: <run>/incidence).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a finished run and compare metrics and checkpoint.
    ReplayCheck {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario name or path to a scenario JSON file.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "hgac")]
    algo: Algorithm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long, default_value_t = 2)]
    workers: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 0.01)]
    omega: f64,
    #[arg(long, default_value_t = 0.005)]
    tau: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 100_000)]
    buffer_capacity: usize,
    #[arg(long, default_value_t = 4)]
    updates_per_cycle: usize,
    #[arg(long, default_value_t = 100)]
    steps_per_update: usize,
    #[arg(long, default_value_t = hgac::envs::DEFAULT_HORIZON)]
    episode_length: usize,
    #[arg(long, default_value_t = 1e-3)]
    critic_lr: f64,
    #[arg(long, default_value_t = 1e-3)]
    actor_lr: f64,
    /// Dump incidence heatmaps every this many episodes (0: final only).
    #[arg(long, default_value_t = 1000)]
    heatmap_every: usize,
    #[arg(long, default_value = "f32")]
    scalar: ScalarKind,
    /// Output directory (default: <out-root>/<scenario>_<algo>_s<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// One rollout worker and a zeroed seconds column.
    #[arg(long)]
    deterministic: bool,
}

impl RunArgs {
    fn into_config(self, out_root: PathBuf) -> RunConfig {
        let train = TrainConfig {
            gamma: self.gamma,
            omega: self.omega,
            tau: self.tau,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            updates_per_cycle: self.updates_per_cycle,
            steps_per_update: self.steps_per_update,
            episode_length: self.episode_length,
            total_episodes: self.episodes,
            rollout_workers: self.workers,
            seed: self.seed,
            critic_lr: self.critic_lr,
            actor_lr: self.actor_lr,
        };
        let out = self
            .out
            .unwrap_or_else(|| RunConfig::default_out_dir(&out_root, &self.scenario, self.algo, self.seed));
        let is_file = std::path::Path::new(&self.scenario).exists() && hgac::envs::builtin(&self.scenario).is_none();
        let mut cfg = RunConfig::new(&self.scenario, self.algo, train, out);
        cfg.scenario_path = is_file.then(|| PathBuf::from(&self.scenario));
        cfg.heatmap_every = self.heatmap_every;
        cfg.scalar = self.scalar;
        cfg.deterministic = self.deterministic;
        cfg
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Command::Run(args) => {
            let cfg = args.into_config(cli.out_root);
            let dir = cfg.out_dir.clone();
            let manifest = run(cfg).context("training run failed")?;
            println!(
                "{} episodes, {} updates -> {} (checkpoint {})",
                manifest.episodes,
                manifest.updates,
                dir.display(),
                manifest.checkpoint.git_blob_sha1
            );
        }
        Command::EvalBaselines {
            scenario,
            seeds,
            episodes,
            episode_length,
        } => {
            let env = resolve_scenario(&scenario)?;
            let report = eval_baselines(&env, &seeds, episode_length, episodes)?;
            println!(
                "{}: random {:.4} ± {:.4}, greedy {:.4} ± {:.4} ({} episodes each)",
                report.scenario,
                report.random.mean,
                report.random.std,
                report.greedy.mean,
                report.greedy.std,
                report.random.episodes
            );
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::DumpIncidence { run, seed, out } => {
            let out = out.unwrap_or_else(|| run.join("incidence"));
            let report = dump_run_incidence(&run, seed, &out)
                .with_context(|| format!("dumping incidence of {}", run.display()))?;
            for f in &report.files {
                println!("{}", f.display());
            }
            if let Some(p) = &report.pairing {
                println!("pairing rover->tower: {:?}", p.pairing);
                for (k, (a, ok)) in p.per_head.iter().zip(&p.head_matches).enumerate() {
                    println!("head {k}: {a:?} {}", if *ok { "matches" } else { "differs" });
                }
            }
        }
        Command::ReplayCheck { run } => {
            let report = replay_check(&run).with_context(|| format!("replaying {}", run.display()))?;
            println!(
                "metrics byte-identical: {}, metrics identical ignoring time: {}, checkpoint identical: {}",
                report.metrics_identical, report.metrics_identical_ignoring_time, report.checkpoint_identical
            );
            if !report.reproduced() {
                bail!("run {} did not reproduce", run.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
