//! The three per-update computations: soft targets, critic regression and
//! the counterfactual-baseline policy gradient.

use ndarray::Array2;
use rand::Rng;

use super::replay::Transition;
use crate::agents::{Actors, Critic, PolicyDistribution};
use crate::approximator::{mlp_eval, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

type Sample<'a, T> = (&'a [Vec<T>], &'a [usize]);

/// Policies of every agent for every observation set, indexed `[b][i]`.
/// Rows sharing a role go through the actor network in one pass.
pub fn batch_policies<T: Scalar>(
    actors: &Actors,
    params: &ParamStore<T>,
    obs: &[&[Vec<T>]],
) -> Result<Vec<Vec<PolicyDistribution<T>>>> {
    let layout = actors.layout();
    let n = layout.n_agents();
    let mut out: Vec<Vec<Option<PolicyDistribution<T>>>> = vec![vec![None; n]; obs.len()];
    for &role in layout.roles() {
        let members = layout.members(role);
        let width = layout.role_spec(role).obs_dim;
        let mut x = Array2::zeros((obs.len() * members.len(), width));
        for (b, o) in obs.iter().enumerate() {
            for (k, &i) in members.iter().enumerate() {
                if o[i].len() != width {
                    return Err(Error::Contract(format!(
                        "sample {b} agent {i}: observation width {} != {width}",
                        o[i].len()
                    )));
                }
                x.row_mut(b * members.len() + k)
                    .iter_mut()
                    .zip(&o[i])
                    .for_each(|(d, &v)| *d = v);
            }
        }
        let logits = mlp_eval(&actors.spec(role), params, &Actors::prefix(role), x)?;
        for (b, slot) in out.iter_mut().enumerate() {
            for (k, &i) in members.iter().enumerate() {
                let row = logits.row(b * members.len() + k);
                slot[i] = Some(PolicyDistribution::from_logits(&row.to_vec()));
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|r| r.into_iter().map(|p| p.expect("every agent has a role")).collect())
        .collect())
}

/// Soft bootstrap targets, `B x N`:
/// `y_i = r_i + gamma (1 - done) (Qbar_i(o', a') - omega log pibar_i(a'_i | o'_i))`
/// with one joint next action `a'` drawn from the target policies.
///
/// Only target parameters are read, so no gradient can reach the online
/// networks from here.
#[allow(clippy::too_many_arguments)]
pub fn compute_targets<T: Scalar, R: Rng>(
    batch: &[&Transition<T>],
    critic: &Critic,
    target_critic: &ParamStore<T>,
    actors: &Actors,
    target_actors: &ParamStore<T>,
    gamma: f64,
    omega: f64,
    rng: &mut R,
) -> Result<Array2<T>> {
    let n = critic.layout().n_agents();
    let next_obs: Vec<&[Vec<T>]> = batch.iter().map(|t| t.next_obs.as_slice()).collect();
    let pis = batch_policies(actors, target_actors, &next_obs)?;
    let mut next_actions = Vec::with_capacity(batch.len());
    let mut log_pi = Array2::zeros((batch.len(), n));
    for (b, row) in pis.iter().enumerate() {
        let acts: Vec<usize> = row.iter().map(|p| p.sample(rng)).collect();
        for (i, &a) in acts.iter().enumerate() {
            log_pi[[b, i]] = row[i].log_probs[a];
        }
        next_actions.push(acts);
    }
    let samples: Vec<Sample<T>> = next_obs
        .iter()
        .zip(&next_actions)
        .map(|(o, a)| (*o, a.as_slice()))
        .collect();
    let q_next = critic.q_batch(target_critic, &samples)?;

    let (g, w) = (T::lit(gamma), T::lit(omega));
    let mut y = Array2::zeros((batch.len(), n));
    for (b, t) in batch.iter().enumerate() {
        let cont = if t.done { T::zero() } else { g };
        for i in 0..n {
            let v = t.rewards[i] + cont * (q_next[[b, i]] - w * log_pi[[b, i]]);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "critic target".into(),
                    index: vec![b, i],
                });
            }
            y[[b, i]] = v;
        }
    }
    Ok(y)
}

/// Regresses the online critic onto `targets`:
/// `L = sum_i mean_b (Q_i - y_i)^2`. Gradients are accumulated into
/// `params`; the loss value is returned.
pub fn critic_loss<T: Scalar>(
    batch: &[&Transition<T>],
    critic: &Critic,
    params: &mut ParamStore<T>,
    targets: &Array2<T>,
) -> Result<T> {
    let n = critic.layout().n_agents();
    let samples: Vec<Sample<T>> = batch
        .iter()
        .map(|t| (t.obs.as_slice(), t.actions.as_slice()))
        .collect();
    let mut tape = Tape::new();
    let g = critic.record(&mut tape, params, &samples)?;
    let q = tape.value(g.q);
    let inv_b = T::lit(1.0 / batch.len() as f64);
    let mut loss = T::zero();
    let mut seed = Array2::zeros((batch.len() * n, 1));
    for b in 0..batch.len() {
        for i in 0..n {
            let d = q[[b * n + i, 0]] - targets[[b, i]];
            loss += d * d * inv_b;
            seed[[b * n + i, 0]] = T::lit(2.0) * d * inv_b;
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            what: "critic loss".into(),
            index: vec![],
        });
    }
    tape.backward(g.q, seed).accumulate_into(&tape, params);
    Ok(loss)
}

/// Advantage of `taken` against the policy-weighted counterfactual baseline
/// `b = sum_a pi(a) Q(a)`. Returns `(advantage, baseline)`.
pub fn counterfactual_advantage<T: Scalar>(q: &[T], probs: &[T], taken: usize) -> (T, T) {
    let baseline = q.iter().zip(probs).map(|(&qa, &p)| qa * p).sum::<T>();
    (q[taken] - baseline, baseline)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyStats<T> {
    pub loss: T,
    /// Mean policy entropy over the batch and agents.
    pub entropy: T,
    /// Mean advantage over the batch and agents.
    pub mean_advantage: T,
}

/// Policy-gradient step for every agent. For agent `i`, the action is drawn
/// afresh from the current policy while the other agents keep the stored
/// actions; the per-sample loss is
/// `-log pi(a_i) * (A_i - omega log pi(a_i))` with the bracket held constant.
/// Gradients go into `actor_params` only; the critic is read-only.
#[allow(clippy::too_many_arguments)]
pub fn policy_gradient<T: Scalar, R: Rng>(
    batch: &[&Transition<T>],
    critic: &Critic,
    critic_params: &ParamStore<T>,
    actors: &Actors,
    actor_params: &mut ParamStore<T>,
    omega: f64,
    rng: &mut R,
) -> Result<PolicyStats<T>> {
    let layout = actors.layout();
    let n = layout.n_agents();
    let bsz = batch.len();
    let obs: Vec<&[Vec<T>]> = batch.iter().map(|t| t.obs.as_slice()).collect();
    let pis = batch_policies(actors, actor_params, &obs)?;
    let sampled: Vec<Vec<usize>> = pis
        .iter()
        .map(|row| row.iter().map(|p| p.sample(rng)).collect())
        .collect();
    let samples: Vec<Sample<T>> = batch
        .iter()
        .map(|t| (t.obs.as_slice(), t.actions.as_slice()))
        .collect();

    let w = T::lit(omega);
    let inv_b = T::lit(1.0 / bsz as f64);
    // coef[b][i] = A - omega log pi(a), treated as a constant.
    let mut coef = vec![vec![T::zero(); n]; bsz];
    let mut loss = T::zero();
    let mut adv_sum = T::zero();
    for i in 0..n {
        let cf = critic.counterfactual_batch(critic_params, &samples, i)?;
        for b in 0..bsz {
            let a = sampled[b][i];
            let pi = &pis[b][i];
            let (adv, _) = counterfactual_advantage(
                cf.row(b).as_slice().expect("contiguous row"),
                &pi.probs,
                a,
            );
            let c = adv - w * pi.log_probs[a];
            if !c.is_finite() {
                return Err(Error::NonFinite {
                    what: "policy-gradient coefficient".into(),
                    index: vec![b, i],
                });
            }
            coef[b][i] = c;
            loss -= pi.log_probs[a] * c * inv_b;
            adv_sum += adv;
        }
    }

    for &role in layout.roles() {
        let members = layout.members(role);
        let spec = layout.role_spec(role);
        let mut x = Array2::zeros((bsz * members.len(), spec.obs_dim));
        let mut seed = Array2::zeros((bsz * members.len(), spec.n_actions));
        for b in 0..bsz {
            for (k, &i) in members.iter().enumerate() {
                let r = b * members.len() + k;
                x.row_mut(r).iter_mut().zip(&obs[b][i]).for_each(|(d, &v)| *d = v);
                let pi = &pis[b][i];
                let scale = coef[b][i] * inv_b;
                for (c, &p) in pi.probs.iter().enumerate() {
                    let onehot = if c == sampled[b][i] { T::one() } else { T::zero() };
                    seed[[r, c]] = scale * (p - onehot);
                }
            }
        }
        let mut tape = Tape::new();
        let logits = actors.logits_on_tape(&mut tape, actor_params, role, x)?;
        tape.backward(logits, seed).accumulate_into(&tape, actor_params);
    }

    let entropy = pis.iter().flatten().map(|p| p.entropy()).sum::<T>() / T::lit((bsz * n) as f64);
    Ok(PolicyStats {
        loss,
        entropy,
        mean_advantage: adv_sum / T::lit((bsz * n) as f64),
    })
}
