//! Twin-critic TD learning and the blended imitation/actor-critic objective.
//!
//! The actor minimizes
//!
//! ```text
//! mean_i[(1 - lambda_i) * -min_k Q_k(s_i, pi(s_i))] + alpha * mean_i(lambda_i) * L_bc
//! L_bc = mean_j || a_j^e - pi(s_j^e) ||^2
//! ```
//!
//! where `lambda_i` is per-sample. With a constant `lambda` this is
//! `(1 - lambda) L_rl + alpha lambda L_bc`. The BC batch is drawn from the
//! expert dataset independently of the replay batch.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::env::{ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{hstack, AdamState, Gradients, Mlp};
use crate::rl::replay::Batch;

/// Online and target networks of the twin-critic learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub actor_target: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
}

impl Networks {
    /// Targets start as exact copies of the online networks.
    pub fn new(actor: Mlp, critic1: Mlp, critic2: Mlp) -> Self {
        Networks {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
        }
    }

    pub fn soft_update_targets(&mut self, tau: f64) -> Result<()> {
        crate::nn::soft_update(&mut self.actor_target, &self.actor, tau)?;
        crate::nn::soft_update(&mut self.critic1_target, &self.critic1, tau)?;
        crate::nn::soft_update(&mut self.critic2_target, &self.critic2, tau)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    pub actor: AdamState,
    pub critic1: AdamState,
    pub critic2: AdamState,
}

/// Target-policy smoothing noise (off unless configured).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub sigma: f64,
    pub clip: f64,
}

/// Expert state/action pairs ready for the network; states scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertBatch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
}

fn q_values(critic: &Mlp, states: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let q = critic.predict(hstack(states, actions).view())?;
    Ok(q.column(0).to_owned())
}

/// `y = r + gamma * (1 - done) * min(Q1'(s', a'), Q2'(s', a'))`, `a' = pi'(s')`.
pub fn td_targets<R: Rng + ?Sized>(
    nets: &Networks,
    batch: &Batch,
    gamma: f64,
    smoothing: Option<(Smoothing, &mut R)>,
) -> Result<Array1<f64>> {
    let mut next_actions = nets.actor_target.predict(batch.next_states.view())?;
    if let Some((sm, rng)) = smoothing {
        let normal = Normal::new(0.0, sm.sigma).map_err(|e| Error::Config(e.to_string()))?;
        for v in next_actions.iter_mut() {
            let eps: f64 = normal.sample(rng);
            *v = (*v + eps.clamp(-sm.clip, sm.clip)).clamp(-1.0, 1.0);
        }
    }
    let q1 = q_values(&nets.critic1_target, batch.next_states.view(), next_actions.view())?;
    let q2 = q_values(&nets.critic2_target, batch.next_states.view(), next_actions.view())?;
    let mut y = Array1::zeros(batch.len());
    for i in 0..batch.len() {
        y[i] = batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * q1[i].min(q2[i]);
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::non_finite(format!("critic target for sample {i}")));
    }
    Ok(y)
}

/// Squared-error regression step of one critic toward `targets`. Returns the
/// loss before the step.
fn regress_critic(
    critic: &mut Mlp,
    opt: &mut AdamState,
    inputs: ArrayView2<'_, f64>,
    targets: &Array1<f64>,
) -> Result<f64> {
    let n = targets.len() as f64;
    let (q, cache) = critic.forward(inputs)?;
    let mut grad = Array2::zeros(q.dim());
    let mut loss = 0.0;
    for i in 0..targets.len() {
        let err = q[[i, 0]] - targets[i];
        loss += err * err;
        grad[[i, 0]] = 2.0 * err / n;
    }
    let (g, _) = critic.backward(&cache, grad.view())?;
    opt.step(critic, &g)?;
    Ok(loss / n)
}

/// One Adam step on each critic. Returns the mean of the two critics' mean
/// squared TD errors.
pub fn critic_update<R: Rng + ?Sized>(
    nets: &mut Networks,
    opts: &mut Optimizers,
    batch: &Batch,
    gamma: f64,
    smoothing: Option<(Smoothing, &mut R)>,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("critic update needs a nonempty batch".into()));
    }
    let y = td_targets(nets, batch, gamma, smoothing)?;
    let inputs = hstack(batch.states.view(), batch.actions.view());
    let l1 = regress_critic(&mut nets.critic1, &mut opts.critic1, inputs.view(), &y)?;
    let l2 = regress_critic(&mut nets.critic2, &mut opts.critic2, inputs.view(), &y)?;
    Ok(0.5 * (l1 + l2))
}

/// Where the blend weight comes from for one actor update.
#[derive(Debug, Clone, Copy)]
pub enum LambdaSource<'a> {
    Constant(f64),
    /// Per-sample comparison against the pretrained expert policy.
    Adaptive(&'a Mlp),
}

/// Per-sample adaptive weight: 1 iff either critic scores the expert action
/// strictly above the current policy's action.
pub fn adaptive_lambda(
    nets: &Networks,
    expert_policy: &Mlp,
    states: ArrayView2<'_, f64>,
) -> Result<Vec<f64>> {
    let pi = nets.actor.predict(states)?;
    let pe = expert_policy.predict(states)?;
    let q1_pi = q_values(&nets.critic1, states, pi.view())?;
    let q2_pi = q_values(&nets.critic2, states, pi.view())?;
    let q1_e = q_values(&nets.critic1, states, pe.view())?;
    let q2_e = q_values(&nets.critic2, states, pe.view())?;
    Ok((0..states.nrows())
        .map(|i| {
            if q1_e[i] > q1_pi[i] || q2_e[i] > q2_pi[i] {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

pub fn lambda_weights(
    source: LambdaSource<'_>,
    nets: &Networks,
    states: ArrayView2<'_, f64>,
) -> Result<Vec<f64>> {
    match source {
        LambdaSource::Constant(v) => Ok(vec![v; states.nrows()]),
        LambdaSource::Adaptive(expert) => adaptive_lambda(nets, expert, states),
    }
}

/// Gradient of `mean_i[w_i * -min(Q1, Q2)(s_i, pi(s_i))]` with respect to the
/// actor parameters, critics held fixed. Returns the gradient and the
/// unweighted loss `L_rl`.
pub fn policy_gradient(
    actor: &Mlp,
    critic1: &Mlp,
    critic2: &Mlp,
    states: ArrayView2<'_, f64>,
    weights: &[f64],
) -> Result<(Gradients, f64)> {
    let n = states.nrows();
    if weights.len() != n {
        return Err(Error::Shape("one weight per state required".into()));
    }
    let (pi, actor_cache) = actor.forward(states)?;
    let inputs = hstack(states, pi.view());
    let (q1, c1) = critic1.forward(inputs.view())?;
    let (q2, c2) = critic2.forward(inputs.view())?;
    let nf = n as f64;
    let mut g1 = Array2::zeros((n, 1));
    let mut g2 = Array2::zeros((n, 1));
    let mut loss = 0.0;
    for i in 0..n {
        // Ties go to the first critic.
        if q1[[i, 0]] <= q2[[i, 0]] {
            loss -= q1[[i, 0]];
            g1[[i, 0]] = -weights[i] / nf;
        } else {
            loss -= q2[[i, 0]];
            g2[[i, 0]] = -weights[i] / nf;
        }
    }
    let (_, d1) = critic1.backward(&c1, g1.view())?;
    let (_, d2) = critic2.backward(&c2, g2.view())?;
    let d_pi = &d1.slice(s![.., OBS_DIM..]) + &d2.slice(s![.., OBS_DIM..]);
    let (grads, _) = actor.backward(&actor_cache, d_pi.view())?;
    Ok((grads, loss / nf))
}

/// Gradient of `scale * mean_j ||a_j - pi(s_j)||^2`. Returns the gradient and
/// the unscaled loss.
pub fn bc_gradient(actor: &Mlp, expert: &ExpertBatch, scale: f64) -> Result<(Gradients, f64)> {
    let m = expert.states.nrows();
    if m == 0 || expert.actions.dim() != (m, ACTION_DIM) {
        return Err(Error::Shape("expert batch must hold 4-dim actions".into()));
    }
    let (pi, cache) = actor.forward(expert.states.view())?;
    let mf = m as f64;
    let diff = &pi - &expert.actions;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / mf;
    let grad = diff.mapv(|d| scale * 2.0 * d / mf);
    let (grads, _) = actor.backward(&cache, grad.view())?;
    Ok((grads, loss))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActorStats {
    /// Batch mean of the per-sample blend weight.
    pub lambda_mean: f64,
    pub loss_rl: f64,
    /// `L_bc` on the expert batch; 0 when no expert batch was used.
    pub loss_bc: f64,
}

/// One Adam step of the actor on the blended objective.
pub fn actor_update(
    nets: &mut Networks,
    opt: &mut AdamState,
    states: ArrayView2<'_, f64>,
    expert: Option<&ExpertBatch>,
    source: LambdaSource<'_>,
    alpha: f64,
) -> Result<ActorStats> {
    if states.nrows() == 0 {
        return Err(Error::InvalidInput("actor update needs a nonempty batch".into()));
    }
    let lambda = lambda_weights(source, nets, states)?;
    let lambda_mean = lambda.iter().sum::<f64>() / lambda.len() as f64;
    let rl_weights: Vec<f64> = lambda.iter().map(|l| 1.0 - l).collect();
    let (mut grads, loss_rl) =
        policy_gradient(&nets.actor, &nets.critic1, &nets.critic2, states, &rl_weights)?;
    let mut loss_bc = 0.0;
    match expert {
        Some(eb) => {
            let (g_bc, l) = bc_gradient(&nets.actor, eb, alpha * lambda_mean)?;
            grads.add_assign(&g_bc);
            loss_bc = l;
        }
        None if lambda_mean > 0.0 => {
            return Err(Error::Config(
                "imitation weight is positive but no expert data was supplied".into(),
            ));
        }
        None => {}
    }
    opt.step(&mut nets.actor, &grads)?;
    Ok(ActorStats {
        lambda_mean,
        loss_rl,
        loss_bc,
    })
}

/// Linear schedule `max(0, 0.5 - e k)`.
pub fn linear_lambda(episode: u64, k: f64) -> f64 {
    (0.5 - episode as f64 * k).clamp(0.0, 0.5)
}
