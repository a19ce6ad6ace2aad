use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{Engagement, EnvConfig, Outcome, ACTION_BOUND, ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::expert::ExpertDataset;
use crate::flightsim::{OpponentMode, SimConfig};
use crate::nn::{Activation, AdamConfig, AdamState, Architecture, Mlp};
use crate::policy::{actor_raw, ActorPolicy};
use crate::rl::replay::{ReplayBuffer, Transition};
use crate::rl::update::{
    actor_update, critic_update, linear_lambda, ExpertBatch, LambdaSource, Networks, Optimizers,
    Smoothing,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    Linear,
    Adaptive,
    /// Pure actor-critic: the TD3 baseline.
    Zero,
    One,
}

impl LambdaMode {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(LambdaMode::Linear),
            "adaptive" => Ok(LambdaMode::Adaptive),
            "zero" | "constant-zero" => Ok(LambdaMode::Zero),
            "one" | "constant-one" => Ok(LambdaMode::One),
            other => Err(Error::Config(format!("unknown scheduler `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LambdaMode::Linear => "linear",
            LambdaMode::Adaptive => "adaptive",
            LambdaMode::Zero => "zero",
            LambdaMode::One => "one",
        }
    }

    pub fn needs_expert_data(&self) -> bool {
        !matches!(self, LambdaMode::Zero)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub scheduler: LambdaMode,
    pub batch_size: usize,
    /// Expert minibatch size for the imitation term.
    pub expert_batch_size: usize,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha: f64,
    pub lambda_k: f64,
    pub buffer_capacity: usize,
    /// Actor and target updates happen every `policy_delay` environment steps.
    pub policy_delay: u64,
    pub exploration_sigma: f64,
    /// Also perturb the raw launch output. The decoded launch decision almost
    /// never flips at this noise level, but the critic then sees a spread of
    /// launch values around the actor's output instead of a single point.
    pub explore_launch: bool,
    pub target_smoothing: bool,
    pub smoothing_sigma: f64,
    pub smoothing_clip: f64,
    pub hidden: Vec<usize>,
    pub max_episodes: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            scheduler: LambdaMode::Adaptive,
            batch_size: 128,
            expert_batch_size: 128,
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            alpha: 1e4,
            lambda_k: 2e-4,
            buffer_capacity: 100_000,
            policy_delay: 2,
            exploration_sigma: 0.1,
            explore_launch: true,
            target_smoothing: false,
            smoothing_sigma: 0.2,
            smoothing_clip: 0.5,
            hidden: vec![256, 512],
            max_episodes: 1000,
            eval_every: 25,
            eval_episodes: 50,
            checkpoint_every: 25,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("alpha", self.alpha),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.tau) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("tau and gamma must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.expert_batch_size == 0 {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(Error::Config("batch_size exceeds buffer_capacity".into()));
        }
        if self.policy_delay == 0 || self.eval_every == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config(
                "policy_delay, eval_every and checkpoint_every must be positive".into(),
            ));
        }
        if !(self.exploration_sigma >= 0.0 && self.lambda_k >= 0.0) {
            return Err(Error::Config("exploration_sigma and lambda_k must be >= 0".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }
}

pub fn actor_architecture(hidden: &[usize]) -> Architecture {
    Architecture::new(OBS_DIM, hidden, ACTION_DIM, Activation::Tanh)
}

pub fn critic_architecture(hidden: &[usize]) -> Architecture {
    Architecture::new(OBS_DIM + ACTION_DIM, hidden, 1, Activation::Identity)
}

/// SplitMix64-style mixing for deriving independent stream seeds.
pub fn mix_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED69));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_INIT: u64 = 1;
const STREAM_EPISODE_RNG: u64 = 2;
const STREAM_ENV: u64 = 3;
pub(crate) const STREAM_EVAL: u64 = 4;

/// Expert pairs held in memory for imitation minibatches; states scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPool {
    states: Array2<f64>,
    actions: Array2<f64>,
}

impl ExpertPool {
    pub fn from_dataset(ds: &ExpertDataset) -> Result<Self> {
        let (states, actions) = ds.scaled_matrices();
        if states.nrows() == 0 {
            return Err(Error::Config("expert dataset is empty".into()));
        }
        Ok(ExpertPool { states, actions })
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> ExpertBatch {
        let mut states = Array2::zeros((n, OBS_DIM));
        let mut actions = Array2::zeros((n, ACTION_DIM));
        for i in 0..n {
            let k = rng.random_range(0..self.len());
            states.row_mut(i).assign(&self.states.row(k));
            actions.row_mut(i).assign(&self.actions.row(k));
        }
        ExpertBatch { states, actions }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub length: u64,
    pub outcome: Outcome,
    /// Mean blend weight over this episode's actor updates.
    pub lambda_mean: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss_rl: Option<f64>,
    pub actor_loss_bc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eval_success_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeRecord>,
    /// Batch-mean blend weight of every actor update, in order.
    pub lambda_trace: Vec<f64>,
    pub evaluations: Vec<(u64, EvalReport)>,
}

impl TrainLog {
    /// Line-delimited JSON, one episode record per line.
    pub fn metrics_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.episodes {
            out.push_str(&serde_json::to_string(r).expect("episode record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn last_eval(&self) -> Option<&EvalReport> {
        self.evaluations.last().map(|(_, r)| r)
    }
}

#[derive(Default)]
struct Running {
    sum: f64,
    n: u64,
}

impl Running {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Full learner state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub nets: Networks,
    pub opts: Optimizers,
    pub buffer: ReplayBuffer,
    pub seed: u64,
    /// Completed training episodes.
    pub episode: u64,
    /// Environment steps taken across all episodes.
    pub total_steps: u64,
    pub log: TrainLog,
    pub best: Option<(f64, Mlp)>,
    pub(crate) expert_pool: Option<ExpertPool>,
    pub(crate) expert_policy: Option<Mlp>,
}

impl Trainer {
    pub fn new(
        cfg: TrainConfig,
        seed: u64,
        expert_pool: Option<ExpertPool>,
        expert_policy: Option<Mlp>,
    ) -> Result<Self> {
        cfg.validate()?;
        if cfg.scheduler.needs_expert_data() && expert_pool.is_none() {
            return Err(Error::Config(format!(
                "scheduler `{}` needs an expert dataset",
                cfg.scheduler.name()
            )));
        }
        let actor_arch = actor_architecture(&cfg.hidden);
        if cfg.scheduler == LambdaMode::Adaptive {
            match &expert_policy {
                None => {
                    return Err(Error::Config(
                        "adaptive scheduler needs a pretrained expert policy".into(),
                    ))
                }
                Some(p) if p.arch().input != OBS_DIM || p.arch().output != ACTION_DIM => {
                    return Err(Error::Shape("expert policy must map 13 -> 4".into()))
                }
                Some(_) => {}
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, STREAM_INIT, 0));
        let actor = Mlp::new(actor_arch.clone(), &mut rng);
        let critic_arch = critic_architecture(&cfg.hidden);
        let critic1 = Mlp::new(critic_arch.clone(), &mut rng);
        let critic2 = Mlp::new(critic_arch.clone(), &mut rng);
        let opts = Optimizers {
            actor: AdamState::new(&actor_arch, AdamConfig::with_lr(cfg.actor_lr)),
            critic1: AdamState::new(&critic_arch, AdamConfig::with_lr(cfg.critic_lr)),
            critic2: AdamState::new(&critic_arch, AdamConfig::with_lr(cfg.critic_lr)),
        };
        Ok(Trainer {
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            cfg,
            nets: Networks::new(actor, critic1, critic2),
            opts,
            seed,
            episode: 0,
            total_steps: 0,
            log: TrainLog::default(),
            best: None,
            expert_pool,
            expert_policy,
        })
    }

    pub(crate) fn restore_parts(
        &mut self,
        nets: Networks,
        opts: Optimizers,
        buffer: ReplayBuffer,
        episode: u64,
        total_steps: u64,
        log: TrainLog,
        best: Option<(f64, Mlp)>,
    ) {
        self.nets = nets;
        self.opts = opts;
        self.buffer = buffer;
        self.episode = episode;
        self.total_steps = total_steps;
        self.log = log;
        self.best = best;
    }

    pub fn actor_policy(&self) -> ActorPolicy {
        ActorPolicy::new(self.nets.actor.clone()).expect("actor architecture is fixed")
    }

    /// Actor with the best evaluation success so far, or the current one.
    pub fn best_actor(&self) -> &Mlp {
        self.best.as_ref().map(|(_, m)| m).unwrap_or(&self.nets.actor)
    }

    /// Seeds of the fixed evaluation episodes used at every evaluation.
    pub fn eval_seeds(&self) -> Vec<u64> {
        (0..self.cfg.eval_episodes as u64)
            .map(|i| mix_seed(self.seed, STREAM_EVAL, i))
            .collect()
    }

    /// Runs one training episode with exploration noise and learning updates.
    pub fn run_episode(
        &mut self,
        sim: &SimConfig,
        env_cfg: &EnvConfig,
        mode: OpponentMode,
    ) -> Result<EpisodeRecord> {
        let e = self.episode;
        let wrap = |step: u64, err: Error| Error::TrainingAborted {
            episode: e,
            step,
            source: Box::new(err),
        };
        let mut env = Engagement::new(
            sim.clone(),
            env_cfg.clone(),
            mode,
            mix_seed(self.seed, STREAM_ENV, e),
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, STREAM_EPISODE_RNG, e));
        let noise = Normal::new(0.0, self.cfg.exploration_sigma.max(0.0))
            .map_err(|err| Error::Config(err.to_string()))?;
        let smoothing = self.cfg.target_smoothing.then_some(Smoothing {
            sigma: self.cfg.smoothing_sigma,
            clip: self.cfg.smoothing_clip,
        });

        let mut obs = env.observation();
        let mut ret = 0.0;
        let mut critic_loss = Running::default();
        let mut lambda = Running::default();
        let mut loss_rl = Running::default();
        let mut loss_bc = Running::default();
        let mut step = 0u64;
        let outcome = loop {
            let mut raw = actor_raw(&self.nets.actor, &obs);
            let noisy = if self.cfg.explore_launch { ACTION_DIM } else { 3 };
            for v in raw.iter_mut().take(noisy) {
                let eps: f64 = noise.sample(&mut rng);
                *v = (*v + eps).clamp(-ACTION_BOUND, ACTION_BOUND);
            }
            let action = crate::env::Action::from_raw(&raw);
            let res = env.step(&action).map_err(|err| wrap(step, err))?;
            ret += res.reward;
            step += 1;
            self.total_steps += 1;
            let terminal = res.done && res.outcome != Some(Outcome::Timeout);
            self.buffer.push(Transition {
                s: obs.to_array(),
                a: raw,
                r: res.reward,
                s_next: res.observation.to_array(),
                done: terminal,
            });

            if self.buffer.len() >= self.cfg.batch_size {
                let batch = self.buffer.sample(self.cfg.batch_size, &mut rng);
                let sm = smoothing.map(|s| (s, &mut rng));
                let l = critic_update(&mut self.nets, &mut self.opts, &batch, self.cfg.gamma, sm)
                    .map_err(|err| wrap(step, err))?;
                critic_loss.push(l);

                if self.total_steps % self.cfg.policy_delay == 0 {
                    let expert_batch = self
                        .expert_pool
                        .as_ref()
                        .filter(|_| self.cfg.scheduler.needs_expert_data())
                        .map(|p| p.sample(self.cfg.expert_batch_size, &mut rng));
                    let source = lambda_source(
                        self.cfg.scheduler,
                        self.episode,
                        self.cfg.lambda_k,
                        self.expert_policy.as_ref(),
                    );
                    let stats = actor_update(
                        &mut self.nets,
                        &mut self.opts.actor,
                        batch.states.view(),
                        expert_batch.as_ref(),
                        source,
                        self.cfg.alpha,
                    );
                    let stats = stats.map_err(|err| wrap(step, err))?;
                    if !(stats.loss_rl.is_finite() && stats.loss_bc.is_finite()) {
                        return Err(wrap(step, Error::non_finite("actor loss")));
                    }
                    self.nets
                        .soft_update_targets(self.cfg.tau)
                        .map_err(|err| wrap(step, err))?;
                    lambda.push(stats.lambda_mean);
                    loss_rl.push(stats.loss_rl);
                    loss_bc.push(stats.loss_bc);
                    self.log.lambda_trace.push(stats.lambda_mean);
                }
            }

            obs = res.observation;
            if res.done {
                break res.outcome.expect("done episodes carry an outcome");
            }
        };

        let record = EpisodeRecord {
            episode: e,
            episode_return: ret,
            length: step,
            outcome,
            lambda_mean: lambda.mean(),
            critic_loss: critic_loss.mean(),
            actor_loss_rl: loss_rl.mean(),
            actor_loss_bc: loss_bc.mean(),
            eval_success_rate: None,
        };
        self.episode += 1;
        Ok(record)
    }

    /// Noiseless evaluation of the current actor on the fixed evaluation seeds.
    pub fn evaluate(
        &self,
        sim: &SimConfig,
        env_cfg: &EnvConfig,
        mode: OpponentMode,
    ) -> Result<EvalReport> {
        evaluate(&self.actor_policy(), sim, env_cfg, mode, &self.eval_seeds())
    }

    /// Trains until `self.episode == episodes`, evaluating every `eval_every`
    /// episodes. `on_episode` sees every finished record (after evaluation).
    pub fn train<F>(
        &mut self,
        sim: &SimConfig,
        env_cfg: &EnvConfig,
        mode: OpponentMode,
        episodes: u64,
        mut on_episode: F,
    ) -> Result<()>
    where
        F: FnMut(&Trainer, &EpisodeRecord) -> Result<()>,
    {
        let train_env = EnvConfig {
            unlimited_missiles: false,
            ..env_cfg.clone()
        };
        while self.episode < episodes {
            let mut record = self.run_episode(sim, &train_env, mode)?;
            if self.episode % self.cfg.eval_every == 0 {
                let report = self.evaluate(sim, &train_env, mode)?;
                record.eval_success_rate = Some(report.success_rate);
                let better = self
                    .best
                    .as_ref()
                    .is_none_or(|(best, _)| report.success_rate >= *best);
                if better {
                    self.best = Some((report.success_rate, self.nets.actor.clone()));
                }
                self.log.evaluations.push((self.episode, report));
            }
            self.log.episodes.push(record);
            let last = self.log.episodes.last().unwrap().clone();
            on_episode(self, &last)?;
        }
        Ok(())
    }
}

fn lambda_source(
    mode: LambdaMode,
    episode: u64,
    k: f64,
    expert: Option<&Mlp>,
) -> LambdaSource<'_> {
    match mode {
        LambdaMode::Linear => LambdaSource::Constant(linear_lambda(episode, k)),
        LambdaMode::Adaptive => LambdaSource::Adaptive(expert.expect("checked at construction")),
        LambdaMode::Zero => LambdaSource::Constant(0.0),
        LambdaMode::One => LambdaSource::Constant(1.0),
    }
}
