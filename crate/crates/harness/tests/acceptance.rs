//! Acceptance criteria, one test each. Every test writes a single
//! `ACCEPTANCE <n>: PASS|FAIL ...` line straight to stderr (bypassing the
//! test harness's output capture) so that the verdicts show up in the log.
//!
//! Criteria 6 and 9 train real agents and dominate the runtime.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use common::{
    conv_oracle, critic_gradient_report, jitter, max_rel_err, random_matrix, random_sample, random_vec, small_critic,
    toy_layout, FD_TOL,
};
use hgac::agents::{Actors, CriticInput, IncidenceMode, PolicyDistribution};
use hgac::approximator::{load_checkpoint, save_checkpoint, Activation, ParamStore};
use hgac::envs::builtin;
use hgac::hypergraph::{
    attention_incidence, generator_spec, hypergraph_convolve, mlp_incidence, static_incidence, ConvLayerParams,
    HyperedgeWeights, IncidenceMatrix, EPS_DEG,
};
use hgac::learner::{compute_targets, counterfactual_advantage, critic_loss, Algorithm, TrainConfig, Transition};
use hgac_harness::incidence::parse_csv;
use hgac_harness::run::{load_learner, CHECKPOINT_FILE, HEATMAP_DIR, METRICS_FILE};
use hgac_harness::{dump_run_incidence, eval_baselines, final_mean_return, replay_check, run, RunConfig};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 3] = [0, 1, 2];
const TRAIN_EPISODES: usize = 5000;
const FINAL_WINDOW: usize = 500;
const GAP_FRACTION: f64 = 0.3;

fn report(id: u32, pass: bool, detail: &str) {
    let line = format!("ACCEPTANCE {id}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    let log = scratch().join("acceptance.log");
    if let Ok(mut f) = std::fs::OpenOptions::new().create(true).append(true).open(log) {
        let _ = f.write_all(line.as_bytes());
    }
}

fn scratch() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn train_run(scenario: &str, algo: Algorithm, seed: u64, episodes: usize, heatmap_every: usize) -> PathBuf {
    let out = scratch().join(format!("{scenario}_{algo}_s{seed}_{episodes}"));
    let _ = std::fs::remove_dir_all(&out);
    let train = TrainConfig {
        total_episodes: episodes,
        seed,
        ..Default::default()
    };
    let mut cfg = RunConfig::new(scenario, algo, train, out.clone());
    cfg.deterministic = true;
    cfg.heatmap_every = heatmap_every;
    run(cfg).unwrap();
    out
}

#[test]
fn criterion_1_convolution_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (n, m) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let (f, f_out) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let x = random_matrix(&mut rng, n, f, -2.0, 2.0);
        let h = random_matrix(&mut rng, n, m, 0.0, 1.0);
        let w = random_vec(&mut rng, m, 0.1, 3.0);
        let p = random_matrix(&mut rng, f, f_out, -1.0, 1.0);
        let got = hypergraph_convolve(
            &x,
            &IncidenceMatrix::new(h.clone()).unwrap(),
            &HyperedgeWeights::new(w.clone(), false).unwrap(),
            &ConvLayerParams::new(p.clone(), Activation::Identity),
        )
        .unwrap();
        worst = worst.max(max_rel_err(&got, &conv_oracle(&x, &h, w.as_slice().unwrap(), &p, EPS_DEG), 1e-3));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && secs < 10.0;
    report(1, pass, &format!("1000 instances, max rel err {worst:.2e} (<= 1e-10), {secs:.2}s (< 10s)"));
    assert!(pass);
}

#[test]
fn criterion_2_gradient_suite() {
    let start = Instant::now();
    let mut groups = 0;
    let mut worst = 0.0f64;
    let mut min_probes = usize::MAX;
    for (seed, mode) in [
        IncidenceMode::Mlp { hyperedges: 3 },
        IncidenceMode::Attention,
        IncidenceMode::Static {
            groups: vec![vec![0, 1, 2], vec![3, 4], vec![0, 1, 2, 3, 4]],
        },
    ]
    .into_iter()
    .enumerate()
    {
        for (probes, err) in critic_gradient_report(mode, 200 + seed as u64).values() {
            groups += 1;
            worst = worst.max(*err);
            min_probes = min_probes.min(*probes);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= FD_TOL && min_probes >= 20 && secs < 60.0;
    report(
        2,
        pass,
        &format!("{groups} parameter groups x >= {min_probes} probes over 3 incidence modes, max rel err {worst:.2e} (<= 1e-4), {secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_structural_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut row_err, mut perm_err) = (0.0f64, 0.0f64);
    let (mut diag_ok, mut identity_ok) = (true, true);
    let cases = 100;
    for _ in 0..cases {
        let (n, m, f) = (rng.gen_range(1..=8), rng.gen_range(1..=8), rng.gen_range(1..=5));
        let x = random_matrix(&mut rng, n, f, -2.0, 2.0);

        let spec = generator_spec(f, m).unwrap();
        let mut store = ParamStore::new();
        spec.init_params(&mut store, "g", &mut rng).unwrap();
        jitter(&mut store, &mut rng, 2.0);
        let h = mlp_incidence(&x, &store, "g", m).unwrap();
        row_err = h.row_sums().iter().fold(row_err, |w, s| w.max((s - 1.0).abs()));

        let wq = random_matrix(&mut rng, 4, f, -2.0, 2.0);
        let wk = random_matrix(&mut rng, 4, f, -2.0, 2.0);
        let a = attention_incidence(&x, &wq, &wk).unwrap();
        diag_ok &= (0..n).all(|i| a.get(i, i) == 1.0);

        let id = hypergraph_convolve(
            &x,
            &IncidenceMatrix::new(Array2::eye(n)).unwrap(),
            &HyperedgeWeights::ones(n),
            &ConvLayerParams::new(Array2::eye(f), Activation::Identity),
        )
        .unwrap();
        identity_ok &= id == x;

        let hr = random_matrix(&mut rng, n, m, 0.0, 1.0);
        let w = HyperedgeWeights::new(random_vec(&mut rng, m, 0.2, 2.0), false).unwrap();
        let layer = ConvLayerParams::new(random_matrix(&mut rng, f, 3, -1.0, 1.0), Activation::Relu);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let base = hypergraph_convolve(&x, &IncidenceMatrix::new(hr.clone()).unwrap(), &w, &layer).unwrap();
        let moved = hypergraph_convolve(
            &x.select(Axis(0), &perm),
            &IncidenceMatrix::new(hr.select(Axis(0), &perm)).unwrap(),
            &w,
            &layer,
        )
        .unwrap();
        perm_err = perm_err.max(max_rel_err(&moved, &base.select(Axis(0), &perm), 1.0));
    }
    let pass = row_err <= 1e-6 && diag_ok && identity_ok && perm_err <= 1e-9;
    report(
        3,
        pass,
        &format!(
            "{cases} cases each: row-sum err {row_err:.1e}, attention diagonal exactly 1: {diag_ok}, identity exact: {identity_ok}, permutation err {perm_err:.1e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_exact_counterfactual_baseline() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    let cases = 120;
    for case in 0..cases {
        let layout = toy_layout(1 + case % 3, 1 + case % 2);
        let n = layout.n_agents();
        let mode = match case % 3 {
            0 => IncidenceMode::Mlp { hyperedges: n },
            1 => IncidenceMode::Attention,
            _ => IncidenceMode::Static {
                groups: vec![(0..n).collect()],
            },
        };
        let critic = small_critic(layout.clone(), mode, 2);
        let mut params = critic.init_params::<f64, _>(&mut rng).unwrap();
        jitter(&mut params, &mut rng, 0.5);
        let (obs, actions) = random_sample(&mut rng, &layout);
        let agent = rng.gen_range(0..n);
        let k = layout.spec(agent).n_actions;
        let pi = PolicyDistribution::from_logits(&(0..k).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<f64>>());
        let q = critic.counterfactual_q(&CriticInput { obs, actions }, agent, &params).unwrap();
        let mean: f64 = (0..k).map(|a| pi.probs[a] * counterfactual_advantage(&q, &pi.probs, a).0).sum();
        worst = worst.max(mean.abs());
    }
    let pass = worst <= 1e-9;
    report(4, pass, &format!("{cases} random critics/policies, max |E[A]| {worst:.2e} (<= 1e-9)"));
    assert!(pass);
}

#[test]
fn criterion_5_loss_fixpoint_and_leaks() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let env = builtin("cn_small").unwrap();
    let layout = hgac::agents::AgentLayout::new(hgac::envs::agent_specs(&env)).unwrap();
    let critic = small_critic(layout.clone(), IncidenceMode::Attention, 2);
    let actors = Actors::new(layout.clone());
    let mut online = critic.init_params::<f64, _>(&mut rng).unwrap();
    jitter(&mut online, &mut rng, 0.3);
    let target_c = online.detached_clone();
    let target_a = actors.init_params::<f64, _>(&mut rng).unwrap();
    let online_a = target_a.detached_clone();
    let batch: Vec<Transition<f64>> = (0..8)
        .map(|_| {
            let (obs, actions) = random_sample(&mut rng, &layout);
            let (next_obs, _) = random_sample(&mut rng, &layout);
            Transition {
                obs,
                actions,
                rewards: vec![rng.gen_range(-1.0..1.0); 2],
                next_obs,
                done: false,
            }
        })
        .collect();
    let refs: Vec<&Transition<f64>> = batch.iter().collect();
    let samples: Vec<(&[Vec<f64>], &[usize])> =
        batch.iter().map(|t| (t.obs.as_slice(), t.actions.as_slice())).collect();

    let y = critic.q_batch(&online, &samples).unwrap();
    let loss = critic_loss(&refs, &critic, &mut online, &y).unwrap();
    let fix_ok = loss == 0.0 && online.grads_are_zero();

    let before = online.clone();
    compute_targets(&refs, &critic, &target_c, &actors, &target_a, 0.99, 0.01, &mut rng).unwrap();
    let leak_free = [&online, &online_a, &target_c, &target_a].iter().all(|s| s.grads_are_zero())
        && online.iter().all(|(n, p)| p.value() == before.value(n).unwrap());
    let pass = fix_ok && leak_free;
    report(5, pass, &format!("Q == target: loss {loss}, zero gradients: {fix_ok}; targets leave online gradients untouched: {leak_free}"));
    assert!(pass);
}

struct SanityResult {
    line: String,
    pass: bool,
}

fn training_sanity(scenario: &str, algo: Algorithm, dirs: &[PathBuf]) -> SanityResult {
    let env = builtin(scenario).unwrap();
    let base = eval_baselines(&env, &SEEDS, 25, 500).unwrap();
    let finals: Vec<f64> = dirs.iter().map(|d| final_mean_return(d, FINAL_WINDOW).unwrap()).collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let threshold = base.threshold(GAP_FRACTION);
    let pass = mean >= threshold;
    SanityResult {
        line: format!(
            "{scenario} {algo}: final-{FINAL_WINDOW} mean {mean:.2} over seeds {finals:.2?}; random {:.2}, greedy {:.2}, threshold {threshold:.2} ({:.0}% of gap reached)",
            base.random.mean,
            base.greedy.mean,
            100.0 * (mean - base.random.mean) / (base.greedy.mean - base.random.mean)
        ),
        pass,
    }
}

fn timed_runs(scenario: &str, algo: Algorithm) -> (Vec<PathBuf>, Vec<f64>) {
    SEEDS
        .iter()
        .map(|&s| {
            let t = Instant::now();
            let d = train_run(scenario, algo, s, TRAIN_EPISODES, 1000);
            (d, t.elapsed().as_secs_f64())
        })
        .unzip()
}

/// RT runs are shared between criteria 6 and 9.
fn rt_runs() -> &'static (Vec<PathBuf>, Vec<f64>) {
    static RUNS: OnceLock<(Vec<PathBuf>, Vec<f64>)> = OnceLock::new();
    RUNS.get_or_init(|| timed_runs("rt_small", Algorithm::AttHgac))
}

#[test]
fn criterion_6_training_sanity() {
    let (cn_dirs, cn_secs) = timed_runs("cn_small", Algorithm::Hgac);
    let cn = training_sanity("cn_small", Algorithm::Hgac, &cn_dirs);
    let (rt_dirs, rt_secs) = rt_runs();
    let rt = training_sanity("rt_small", Algorithm::AttHgac, rt_dirs);
    let slowest = cn_secs.iter().chain(rt_secs).fold(0.0f64, |a, &b| a.max(b));
    let pass = cn.pass && rt.pass && slowest <= 900.0;
    report(
        6,
        pass,
        &format!("{} | {} | slowest run {slowest:.0}s (<= 900s)", cn.line, rt.line),
    );
    assert!(pass);
}

#[test]
fn criterion_7_static_hypergraph_ablation() {
    let dir = train_run("ctc_small", Algorithm::HgacCon, 0, 300, 50);
    let env = builtin("ctc_small").unwrap();
    let expect = static_incidence::<f64>(env.static_groups.as_ref().unwrap(), env.n_agents())
        .unwrap()
        .into_entries();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir.join(HEATMAP_DIR))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    let mut all_equal = true;
    for f in &files {
        let m = parse_csv(&std::fs::read_to_string(f).unwrap()).unwrap();
        all_equal &= m == expect;
    }
    let rows = std::fs::read_to_string(dir.join(METRICS_FILE)).unwrap().lines().count() - 1;
    let pass = rows == 300 && files.len() == 4 * 7 && all_equal;
    report(
        7,
        pass,
        &format!("ctc_small hgac-con: {rows} episodes, {} heatmap dumps, all equal to the static 0/1 groups {:?}: {all_equal}", files.len(), env.static_groups.unwrap()),
    );
    assert!(pass);
}

#[test]
fn criterion_8_determinism() {
    let a = train_run("cn_small", Algorithm::AttHgac, 7, 40, 20);
    let bytes_a = std::fs::read(a.join(METRICS_FILE)).unwrap();
    let b = train_run("cn_small", Algorithm::AttHgac, 7, 40, 20);
    let bytes_b = std::fs::read(b.join(METRICS_FILE)).unwrap();
    let metrics_same = bytes_a == bytes_b;

    let replay = replay_check(&a).unwrap();

    let (_, learner) = load_learner::<f64>(&a).unwrap();
    let store = learner.checkpoint_store().unwrap();
    let path = scratch().join("roundtrip.bin");
    save_checkpoint(&store, &path).unwrap();
    let back: ParamStore<f64> = load_checkpoint(&path).unwrap();
    let bit_exact = store.iter().all(|(n, p)| {
        p.value()
            .iter()
            .zip(back.value(n).unwrap().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits())
    }) && back.len() == store.len();
    let file_same = std::fs::read(&path).unwrap() == std::fs::read(a.join(CHECKPOINT_FILE)).unwrap();

    let pass = metrics_same && replay.metrics_identical && replay.checkpoint_identical && bit_exact && file_same;
    report(
        8,
        pass,
        &format!(
            "metrics.csv byte-identical across runs: {metrics_same}; replay-check metrics/checkpoint identical: {}/{}; checkpoint round trip bit-exact: {bit_exact}, re-encoded file identical: {file_same}",
            replay.metrics_identical, replay.checkpoint_identical
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_rt_pairing_readout() {
    let (dirs, _) = rt_runs();
    let mut per_seed = Vec::new();
    for (dir, &seed) in dirs.iter().zip(&SEEDS) {
        let r = dump_run_incidence(dir, seed, &dir.join("incidence")).unwrap();
        let p = r.pairing.expect("rt scenario");
        per_seed.push((seed, p.matching_heads(), p.head_matches.len(), p.pairing, p.per_head));
    }
    let pass = per_seed.iter().any(|(_, ok, _, _, _)| *ok >= 3);
    let detail: Vec<String> = per_seed
        .iter()
        .map(|(s, ok, k, pairing, heads)| format!("seed {s}: {ok}/{k} heads match pairing {pairing:?} (heads {heads:?})"))
        .collect();
    // Reported, not enforced: the readout is qualitative.
    report(9, pass, &format!("{} [pass: >= 3 of 4 heads on >= 1 seed]", detail.join("; ")));
}
