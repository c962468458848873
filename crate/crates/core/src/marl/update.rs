use rand::Rng;

use crate::nn::{clip_global_norm, optimizer_step, soft_update, GradientSet, Matrix};
use crate::Scalar;

use super::gumbel::{gumbel_softmax_backward, gumbel_softmax_with_noise};
use super::{AgentLearner, Batch, MarlError, Result};

fn check_batch<T: Scalar>(learners: &[AgentLearner<T>], batch: &Batch<T>) -> Result<()> {
    let n = learners.len();
    if batch.obs.len() != n || batch.actions.len() != n || batch.next_obs.len() != n || batch.rewards.cols() != n {
        return Err(MarlError::Shape(format!("batch for {} agents, {n} learners", batch.obs.len())));
    }
    if batch.is_empty() {
        return Err(MarlError::Shape("empty batch".into()));
    }
    Ok(())
}

/// One critic step for agent `i`: regress `Q_i(x, a)` onto
/// `y = r_i + gamma * Q'_i(x', mu'(o'))`, dropping the bootstrap term on
/// terminal transitions. Returns the mean squared error before the step.
pub fn critic_update_agent<T: Scalar, R: Rng + ?Sized>(
    learners: &mut [AgentLearner<T>],
    i: usize,
    batch: &Batch<T>,
    gamma: T,
    clip_norm: T,
    rng: &mut R,
) -> Result<T> {
    check_batch(learners, batch)?;
    let b = batch.len();
    let me = &learners[i];
    let needed: Vec<usize> = if me.variant.centralized() {
        (0..learners.len()).collect()
    } else {
        vec![i]
    };
    let mut next_actions: Vec<Option<Matrix<T>>> = vec![None; learners.len()];
    for &j in &needed {
        let lj = &learners[j];
        let own_view = lj.view(j, &batch.next_obs[j])?;
        next_actions[j] = Some(lj.target_actions(&own_view, rng)?);
    }
    let placeholder: Vec<Matrix<T>> = batch.actions.iter().map(|a| Matrix::zeros(a.rows(), a.cols())).collect();
    let next_refs: Vec<&Matrix<T>> = next_actions
        .iter()
        .zip(&placeholder)
        .map(|(a, p)| a.as_ref().unwrap_or(p))
        .collect();
    let x_next = me.critic_input(&batch.next_obs, &next_refs)?;
    let q_next = me.target_critic.forward_batch(&x_next)?.output;

    let action_refs: Vec<&Matrix<T>> = batch.actions.iter().collect();
    let x = me.critic_input(&batch.obs, &action_refs)?;
    let cache = me.critic.forward_batch(&x)?;

    let scale = T::lit(2.0) / T::lit(b as f64);
    let mut upstream = Matrix::zeros(b, 1);
    let mut loss = T::zero();
    for r in 0..b {
        let bootstrap = if batch.done[r] { T::zero() } else { gamma * q_next.get(r, 0) };
        let y = batch.rewards.get(r, i) + bootstrap;
        let diff = cache.output.get(r, 0) - y;
        loss += diff * diff;
        upstream.set(r, 0, scale * diff);
    }
    loss /= T::lit(b as f64);

    let (mut grads, _) = me.critic.backward_batch(&cache, &upstream, false)?;
    clip_global_norm(&mut grads, clip_norm);
    let me = &mut learners[i];
    optimizer_step(&mut me.critic, &grads, &mut me.critic_opt)?;
    Ok(loss)
}

/// One actor step for agent `i` along the deterministic policy gradient:
/// the agent's own action is recomputed by its online actor, other agents'
/// actions come from the batch, and `dQ_i/da_i` is chained through the
/// actor. Returns the actor gradient norm before clipping.
pub fn actor_update_agent<T: Scalar, R: Rng + ?Sized>(
    learners: &mut [AgentLearner<T>],
    i: usize,
    batch: &Batch<T>,
    clip_norm: T,
    rng: &mut R,
) -> Result<T> {
    let mut grads = actor_gradient(learners, i, batch, rng)?;
    let norm = clip_global_norm(&mut grads, clip_norm);
    let me = &mut learners[i];
    optimizer_step(&mut me.actor, &grads, &mut me.actor_opt)?;
    Ok(norm)
}

/// Gradient of the batch objective `-mean_b Q_i(x_b, .., a_i = mu_i(o_b), ..)`
/// with respect to agent `i`'s actor parameters. Message columns use
/// Gumbel-Softmax samples drawn from `rng`.
pub fn actor_gradient<T: Scalar, R: Rng + ?Sized>(
    learners: &[AgentLearner<T>],
    i: usize,
    batch: &Batch<T>,
    rng: &mut R,
) -> Result<GradientSet<T>> {
    check_batch(learners, batch)?;
    let b = batch.len();
    let me = &learners[i];
    let movement = me.layout().space.movement;
    let own_view = me.view(i, &batch.obs[i])?;
    let cache = me.actor.forward_batch(&own_view)?;
    let (own_action, noise) = me.relax_messages(cache.output.clone(), rng)?;

    let mut action_refs: Vec<&Matrix<T>> = batch.actions.iter().collect();
    action_refs[i] = &own_action;
    let x = me.critic_input(&batch.obs, &action_refs)?;
    let q_cache = me.critic.forward_batch(&x)?;
    // maximize mean Q: descend on -mean Q
    let upstream = Matrix::from_vec(b, 1, vec![-T::one() / T::lit(b as f64); b])?;
    let (_, dx) = me.critic.backward_batch(&q_cache, &upstream, true)?;
    let dx = dx.expect("input gradient requested");
    let mut d_out = dx.columns(me.own_action_offset(), own_action.cols())?;
    if let Some(noise) = noise {
        for r in 0..b {
            let logits = &cache.output.row(r)[movement..];
            let y = gumbel_softmax_with_noise(logits, noise.row(r), me.temperature)?;
            let g = gumbel_softmax_backward(&y, &d_out.row(r)[movement..], me.temperature);
            d_out.row_mut(r)[movement..].copy_from_slice(&g);
        }
    }
    let (grads, _) = me.actor.backward_batch(&cache, &d_out, false)?;
    Ok(grads)
}

/// The actor objective `-mean_b Q_i` that [`actor_gradient`] differentiates,
/// with the same `rng` consumption.
pub fn actor_objective<T: Scalar, R: Rng + ?Sized>(
    learners: &[AgentLearner<T>],
    i: usize,
    batch: &Batch<T>,
    rng: &mut R,
) -> Result<T> {
    check_batch(learners, batch)?;
    let me = &learners[i];
    let own_view = me.view(i, &batch.obs[i])?;
    let out = me.actor.forward_batch(&own_view)?.output;
    let (own_action, _) = me.relax_messages(out, rng)?;
    let mut action_refs: Vec<&Matrix<T>> = batch.actions.iter().collect();
    action_refs[i] = &own_action;
    let q = me.critic.forward_batch(&me.critic_input(&batch.obs, &action_refs)?)?.output;
    let sum = q.data().iter().fold(T::zero(), |a, &v| a + v);
    Ok(-sum / T::lit(batch.len() as f64))
}

/// Critic step for every agent on the same batch.
pub fn critic_update<T: Scalar, R: Rng + ?Sized>(
    learners: &mut [AgentLearner<T>],
    batch: &Batch<T>,
    gamma: T,
    clip_norm: T,
    rng: &mut R,
) -> Result<Vec<T>> {
    (0..learners.len())
        .map(|i| critic_update_agent(learners, i, batch, gamma, clip_norm, rng))
        .collect()
}

/// Actor step for every agent on the same batch.
pub fn actor_update<T: Scalar, R: Rng + ?Sized>(
    learners: &mut [AgentLearner<T>],
    batch: &Batch<T>,
    clip_norm: T,
    rng: &mut R,
) -> Result<Vec<T>> {
    (0..learners.len())
        .map(|i| actor_update_agent(learners, i, batch, clip_norm, rng))
        .collect()
}

/// Moves every target network a fraction `kappa` toward its online network.
pub fn soft_update_targets<T: Scalar>(learners: &mut [AgentLearner<T>], kappa: T) -> Result<()> {
    for l in learners {
        soft_update(&mut l.target_actor, &l.actor, kappa)?;
        soft_update(&mut l.target_critic, &l.critic, kappa)?;
    }
    Ok(())
}
