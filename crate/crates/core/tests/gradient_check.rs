//! Reverse-mode gradients of the full critic graph against central finite
//! differences.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::{central_difference, critic_gradient_report as check_critic, jitter, rel_err, FD_PROBES as PROBES, FD_STEP as STEP, FD_TOL as TOL};
use hgac::agents::IncidenceMode;
use hgac::approximator::{mlp_eval, mlp_forward, Activation, MlpSpec, ParamStore, Tape};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn assert_report(label: &str, report: &BTreeMap<String, (usize, f64)>, expected_groups: &[&str]) {
    for g in expected_groups {
        assert!(report.keys().any(|k| k.contains(g)), "{label}: no parameter group matching `{g}`");
    }
    for (group, (probes, worst)) in report {
        assert!(*probes >= 20);
        assert!(*worst <= TOL, "{label} {group}: relative error {worst:e}");
    }
}

#[test]
fn mlp_incidence_critic_gradients() {
    let start = Instant::now();
    let r = check_critic(IncidenceMode::Mlp { hyperedges: 3 }, 1);
    assert_report("mlp", &r, &["embed", "gen.l0", "gen.l1", "log_w", "conv0", "conv1", "critic.q.l0", "critic.q.l1"]);
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn attention_critic_gradients() {
    let r = check_critic(IncidenceMode::Attention, 2);
    assert_report("attention", &r, &["embed", "wq", "wk", "log_w", "conv0", "conv1", "critic.q"]);
}

#[test]
fn static_critic_gradients() {
    let r = check_critic(
        IncidenceMode::Static {
            groups: vec![vec![0, 1, 2], vec![3, 4], vec![0, 1, 2, 3, 4]],
        },
        3,
    );
    assert_report("static", &r, &["embed", "log_w", "conv0", "conv1", "critic.q"]);
}

#[test]
fn mlp_gradients_for_linear_functional() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = MlpSpec::new(vec![4, 9, 7, 3], Activation::Relu, Activation::Identity).unwrap();
    let mut store = ParamStore::new();
    spec.init_params(&mut store, "net", &mut rng).unwrap();
    jitter(&mut store, &mut rng, 0.2);
    let x = Array2::from_shape_fn((5, 4), |_| rng.gen_range(-1.0..1.0));
    let c = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-1.0..1.0));

    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let out = mlp_forward(&mut tape, &spec, &store, "net", xv).unwrap();
    tape.backward(out, c.clone()).accumulate_into(&tape, &mut store);
    let analytic = store.clone();

    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in &names {
        for _ in 0..PROBES {
            let (r, cc) = store.value(name).unwrap().dim();
            let (r, cc) = (rng.gen_range(0..r), rng.gen_range(0..cc));
            let fd = central_difference(&mut store, name, r, cc, STEP, |p| {
                (mlp_eval(&spec, p, "net", x.clone()).unwrap() * &c).sum()
            });
            let g = analytic.grad(name).unwrap()[[r, cc]];
            assert!(rel_err(g, fd) <= TOL, "{name}[{r},{cc}]: {g} vs {fd}");
        }
    }
}
