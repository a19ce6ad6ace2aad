//! Scripted pursuit autopilot used as the demonstrator, dataset recording of
//! its successful episodes, and supervised pretraining of an expert network.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Engagement, EnvConfig, Observation, Outcome, ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::flightsim::{wrap_angle, OpponentMode, SimConfig};
use crate::nn::{AdamConfig, AdamState, Mlp};
use crate::policy::Policy;
use crate::rl::{actor_architecture, bc_gradient, mix_seed, ExpertBatch};

/// Outputs never reach the control saturation exactly.
pub const PID_OUTPUT_LIMIT: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Anti-windup bound on the integral of the error.
    pub integral_limit: f64,
}

impl PidGains {
    pub const fn p(kp: f64) -> Self {
        PidGains {
            kp,
            ki: 0.0,
            kd: 0.0,
            integral_limit: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PidController {
    pub gains: PidGains,
    integral: f64,
    prev_error: Option<f64>,
}

impl PidController {
    pub fn new(gains: PidGains) -> Self {
        PidController {
            gains,
            integral: 0.0,
            prev_error: None,
        }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// One control update; the output is clamped to `+-PID_OUTPUT_LIMIT`.
    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        let g = self.gains;
        let lim = g.integral_limit.abs();
        self.integral = (self.integral + error * dt).clamp(-lim, lim);
        let derivative = match self.prev_error {
            Some(prev) if dt > 0.0 => (error - prev) / dt,
            _ => 0.0,
        };
        self.prev_error = Some(error);
        let u = g.kp * error + g.ki * self.integral + g.kd * derivative;
        if u.is_nan() {
            0.0
        } else {
            u.clamp(-PID_OUTPUT_LIMIT, PID_OUTPUT_LIMIT)
        }
    }
}

/// Per-channel autopilot gains. Errors are in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertGains {
    /// Heading error -> rudder.
    pub heading: PidGains,
    /// Flight-path pitch error -> elevator.
    pub pitch: PidGains,
    /// Roll error (wings level) -> aileron.
    pub roll: PidGains,
    /// Bound on the commanded climb/dive angle.
    pub max_pitch_cmd: f64,
}

impl Default for ExpertGains {
    /// Proportional-only channels, so each action is a function of the
    /// current observation alone.
    fn default() -> Self {
        ExpertGains {
            heading: PidGains::p(2.5),
            pitch: PidGains::p(2.0),
            roll: PidGains::p(1.5),
            max_pitch_cmd: 0.5,
        }
    }
}

/// The autopilot: steers the velocity vector at the opponent and fires as
/// soon as the lock is achieved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPilot {
    pub gains: ExpertGains,
    pub dt: f64,
    heading: PidController,
    pitch: PidController,
    roll: PidController,
}

impl ExpertPilot {
    pub fn new(gains: ExpertGains, dt: f64) -> Self {
        ExpertPilot {
            gains,
            dt,
            heading: PidController::new(gains.heading),
            pitch: PidController::new(gains.pitch),
            roll: PidController::new(gains.roll),
        }
    }

    /// Heading and pitch errors toward the opponent, from the observation.
    pub fn errors(&self, obs: &Observation) -> (f64, f64) {
        let [dx, dy, dz] = obs.delta_position;
        let [_, pitch, yaw] = obs.our_euler;
        let horizontal = dx.hypot(dy);
        let heading_err = if horizontal > 0.0 {
            wrap_angle(dy.atan2(dx) - yaw)
        } else {
            0.0
        };
        let lim = self.gains.max_pitch_cmd;
        let pitch_cmd = dz.atan2(horizontal).clamp(-lim, lim);
        (heading_err, pitch_cmd - pitch)
    }

    pub fn expert_act(&mut self, obs: &Observation) -> Action {
        let (heading_err, pitch_err) = self.errors(obs);
        let roll = obs.our_euler[0];
        let rudder = self.heading.update(heading_err, self.dt);
        let elevator = self.pitch.update(pitch_err, self.dt);
        let aileron = self.roll.update(wrap_angle(-roll), self.dt);
        let launch = if obs.is_locked() && obs.missile_available() {
            1.0
        } else {
            -1.0
        };
        Action {
            rudder,
            elevator,
            aileron,
            launch,
        }
    }
}

impl Policy for ExpertPilot {
    fn reset(&mut self) {
        self.heading.reset();
        self.pitch.reset();
        self.roll.reset();
    }

    fn act(&mut self, obs: &Observation) -> Action {
        self.expert_act(obs)
    }
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertEpisode {
    pub episode_id: u64,
    /// Engagement seed; replaying `actions` from it reproduces `states`.
    pub seed: u64,
    pub success: bool,
    pub states: Vec<[f64; OBS_DIM]>,
    pub actions: Vec<[f64; ACTION_DIM]>,
}

impl ExpertEpisode {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDataset {
    pub mode: OpponentMode,
    pub episodes: Vec<ExpertEpisode>,
}

#[derive(Serialize, Deserialize)]
struct EpisodeMeta {
    episode_id: u64,
    seed: u64,
    steps: u64,
    success: bool,
}

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    record: String,
    format_version: u32,
    mode: OpponentMode,
    episodes: Vec<EpisodeMeta>,
    total_pairs: u64,
}

#[derive(Serialize, Deserialize)]
struct PairRecord {
    episode_id: u64,
    t: u64,
    state: [f64; OBS_DIM],
    action: [f64; ACTION_DIM],
}

impl ExpertDataset {
    pub fn total_pairs(&self) -> usize {
        self.episodes.iter().map(|e| e.len()).sum()
    }

    /// Scaled states and actions stacked row-wise, ready for the networks.
    pub fn scaled_matrices(&self) -> (Array2<f64>, Array2<f64>) {
        let n = self.total_pairs();
        let mut states = Array2::zeros((n, OBS_DIM));
        let mut actions = Array2::zeros((n, ACTION_DIM));
        let pairs = self
            .episodes
            .iter()
            .flat_map(|e| e.states.iter().zip(&e.actions));
        for (i, (s, a)) in pairs.enumerate() {
            for (j, v) in crate::env::scale_observation(s).into_iter().enumerate() {
                states[[i, j]] = v;
            }
            for (j, &v) in a.iter().enumerate() {
                actions[[i, j]] = v;
            }
        }
        (states, actions)
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.episodes {
            if !e.success {
                return Err(Error::InvalidInput(format!(
                    "episode {} is not a successful episode",
                    e.episode_id
                )));
            }
            if e.states.len() != e.actions.len() || e.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "episode {} has mismatched or empty pairs",
                    e.episode_id
                )));
            }
        }
        Ok(())
    }

    /// Line-delimited JSON: a header record followed by one record per pair.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = HeaderRecord {
            record: "header".into(),
            format_version: DATASET_FORMAT_VERSION,
            mode: self.mode,
            episodes: self
                .episodes
                .iter()
                .map(|e| EpisodeMeta {
                    episode_id: e.episode_id,
                    seed: e.seed,
                    steps: e.len() as u64,
                    success: e.success,
                })
                .collect(),
            total_pairs: self.total_pairs() as u64,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for e in &self.episodes {
            for (t, (s, a)) in e.states.iter().zip(&e.actions).enumerate() {
                let rec = PairRecord {
                    episode_id: e.episode_id,
                    t: t as u64,
                    state: *s,
                    action: *a,
                };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, path: &str) -> Result<Self> {
        let fmt = |reason: String| Error::Format {
            path: path.to_string(),
            reason,
        };
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| fmt("empty dataset file".into()))??;
        let header: HeaderRecord =
            serde_json::from_str(&first).map_err(|e| fmt(format!("bad header: {e}")))?;
        if header.record != "header" {
            return Err(fmt("first record is not a header".into()));
        }
        if header.format_version != DATASET_FORMAT_VERSION {
            return Err(fmt(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        let mut index = BTreeMap::new();
        let mut episodes: Vec<ExpertEpisode> = Vec::with_capacity(header.episodes.len());
        for m in &header.episodes {
            index.insert(m.episode_id, episodes.len());
            episodes.push(ExpertEpisode {
                episode_id: m.episode_id,
                seed: m.seed,
                success: m.success,
                states: Vec::with_capacity(m.steps as usize),
                actions: Vec::with_capacity(m.steps as usize),
            });
        }
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PairRecord = serde_json::from_str(&line)
                .map_err(|e| fmt(format!("line {}: {e}", lineno + 2)))?;
            let &k = index
                .get(&rec.episode_id)
                .ok_or_else(|| fmt(format!("line {}: unknown episode", lineno + 2)))?;
            let ep = &mut episodes[k];
            if rec.t != ep.states.len() as u64 {
                return Err(fmt(format!("line {}: out-of-order step", lineno + 2)));
            }
            ep.states.push(rec.state);
            ep.actions.push(rec.action);
        }
        for (m, e) in header.episodes.iter().zip(&episodes) {
            if m.steps != e.len() as u64 {
                return Err(fmt(format!("episode {} is truncated", m.episode_id)));
            }
        }
        let ds = ExpertDataset {
            mode: header.mode,
            episodes,
        };
        if header.total_pairs != ds.total_pairs() as u64 {
            return Err(fmt("pair count does not match header".into()));
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path)?;
        self.write_jsonl(BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path)?;
        Self::read_jsonl(BufReader::new(f), &path.display().to_string())
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub n_success: usize,
    pub gains: ExpertGains,
    /// Candidate episodes run at once (and the size of the quality probe).
    pub probe_episodes: usize,
    /// Abort when the probe success rate is below this.
    pub min_probe_success: f64,
    /// Upper bound on candidate episodes, as a multiple of `n_success`.
    pub max_attempt_factor: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            n_success: 20,
            gains: ExpertGains::default(),
            probe_episodes: 20,
            min_probe_success: 0.5,
            max_attempt_factor: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub attempted: usize,
    pub kept: usize,
    pub total_pairs: usize,
    pub outcomes: BTreeMap<String, usize>,
}

const STREAM_EXPERT: u64 = 11;

/// Flies one expert episode, recording raw observations and emitted actions.
pub fn record_episode(
    gains: ExpertGains,
    sim: &SimConfig,
    env_cfg: &EnvConfig,
    mode: OpponentMode,
    seed: u64,
) -> Result<(Outcome, Vec<[f64; OBS_DIM]>, Vec<[f64; ACTION_DIM]>)> {
    let mut env = Engagement::new(sim.clone(), env_cfg.clone(), mode, seed)?;
    let mut pilot = ExpertPilot::new(gains, sim.dt);
    let mut obs = env.observation();
    let mut states = Vec::new();
    let mut actions = Vec::new();
    loop {
        let a = pilot.expert_act(&obs);
        states.push(obs.to_array());
        actions.push(a.to_array());
        let res = env.step(&a)?;
        obs = res.observation;
        if res.done {
            return Ok((res.outcome.expect("finished episode"), states, actions));
        }
    }
}

/// Runs expert episodes on derived seeds until `n_success` hits are
/// collected. Episodes run in parallel rounds; selection is in seed order, so
/// the result does not depend on thread scheduling.
pub fn generate_dataset(
    mode: OpponentMode,
    cfg: &GenerateConfig,
    seed: u64,
    sim: &SimConfig,
    env_cfg: &EnvConfig,
) -> Result<(ExpertDataset, GenerateSummary)> {
    if cfg.n_success == 0 || cfg.probe_episodes == 0 {
        return Err(Error::Config("n_success and probe_episodes must be positive".into()));
    }
    let env_cfg = EnvConfig {
        unlimited_missiles: false,
        ..env_cfg.clone()
    };
    let max_attempts = cfg.n_success.saturating_mul(cfg.max_attempt_factor.max(1));
    let mut summary = GenerateSummary::default();
    let mut episodes = Vec::new();
    let mut next = 0u64;
    while episodes.len() < cfg.n_success {
        if summary.attempted >= max_attempts {
            return Err(Error::ExpertQuality(format!(
                "only {} of {} successful episodes after {} attempts; outcomes {:?}",
                episodes.len(),
                cfg.n_success,
                summary.attempted,
                summary.outcomes
            )));
        }
        let round: Vec<u64> = (next..next + cfg.probe_episodes as u64).collect();
        next += round.len() as u64;
        let results = round
            .par_iter()
            .map(|&i| {
                let s = mix_seed(seed, STREAM_EXPERT, i);
                record_episode(cfg.gains, sim, &env_cfg, mode, s).map(|r| (s, r))
            })
            .collect::<Result<Vec<_>>>()?;
        let first_round = summary.attempted == 0;
        let mut round_hits = 0;
        for (s, (outcome, states, actions)) in results {
            summary.attempted += 1;
            *summary.outcomes.entry(format!("{outcome:?}")).or_default() += 1;
            if outcome != Outcome::MissileHit {
                continue;
            }
            round_hits += 1;
            if episodes.len() < cfg.n_success {
                episodes.push(ExpertEpisode {
                    episode_id: episodes.len() as u64,
                    seed: s,
                    success: true,
                    states,
                    actions,
                });
            }
        }
        if first_round {
            let rate = round_hits as f64 / cfg.probe_episodes as f64;
            if rate < cfg.min_probe_success {
                return Err(Error::ExpertQuality(format!(
                    "probe success rate {rate:.2} below {:.2} on {} mode; outcomes {:?}",
                    cfg.min_probe_success,
                    mode.name(),
                    summary.outcomes
                )));
            }
        }
    }
    let ds = ExpertDataset { mode, episodes };
    summary.kept = ds.episodes.len();
    summary.total_pairs = ds.total_pairs();
    Ok((ds, summary))
}

/// Replays recorded actions open-loop from the episode seed and returns the
/// observations seen, for determinism checks.
pub fn replay_episode(
    ep: &ExpertEpisode,
    mode: OpponentMode,
    sim: &SimConfig,
    env_cfg: &EnvConfig,
) -> Result<Vec<[f64; OBS_DIM]>> {
    let mut env = Engagement::new(sim.clone(), env_cfg.clone(), mode, ep.seed)?;
    let mut states = Vec::with_capacity(ep.len());
    for a in &ep.actions {
        states.push(env.observation().to_array());
        env.step(&Action::from_raw(a))?;
    }
    Ok(states)
}

// ---------------------------------------------------------------------------
// Behavior-cloning pretraining
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcConfig {
    pub hidden: Vec<usize>,
    pub iterations: u64,
    pub lr: f64,
    pub batch_size: usize,
    pub holdout_fraction: f64,
    /// Held-out loss is checked every this many iterations.
    pub eval_every: u64,
    /// Stop after this many checks without improvement.
    pub patience: u32,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            hidden: vec![256, 512],
            iterations: 200_000,
            lr: 1e-3,
            batch_size: 128,
            holdout_fraction: 0.1,
            eval_every: 1000,
            patience: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BcReport {
    pub iterations: u64,
    /// `(iteration, mean training loss since the previous check, held-out loss)`.
    pub curve: Vec<(u64, f64, f64)>,
    /// Best held-out `mean ||a - pi(s)||^2`; the returned network attains it.
    pub holdout_loss: f64,
    pub train_pairs: usize,
    pub holdout_pairs: usize,
}

fn select_rows(m: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    m.select(ndarray::Axis(0), idx)
}

/// Mean over rows of the squared action error.
pub fn action_mse(net: &Mlp, states: &Array2<f64>, actions: &Array2<f64>) -> Result<f64> {
    let pred = net.predict(states.view())?;
    let diff = &pred - actions;
    Ok(diff.iter().map(|d| d * d).sum::<f64>() / states.nrows().max(1) as f64)
}

/// Supervised regression of the expert actions onto scaled states.
pub fn pretrain_bc(ds: &ExpertDataset, cfg: &BcConfig) -> Result<(Mlp, BcReport)> {
    let (states, actions) = ds.scaled_matrices();
    let n = states.nrows();
    if n < 2 {
        return Err(Error::InvalidInput("expert dataset needs at least two pairs".into()));
    }
    if cfg.batch_size == 0 || cfg.eval_every == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("bc batch_size, eval_every and lr must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 21, 0));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_hold = ((n as f64 * cfg.holdout_fraction).round() as usize).clamp(1, n - 1);
    let (hold_idx, train_idx) = order.split_at(n_hold);
    let hold_s = select_rows(&states, hold_idx);
    let hold_a = select_rows(&actions, hold_idx);
    let train_s = select_rows(&states, train_idx);
    let train_a = select_rows(&actions, train_idx);

    let arch = actor_architecture(&cfg.hidden);
    let mut net = Mlp::new(arch.clone(), &mut rng);
    let mut opt = AdamState::new(&arch, AdamConfig::with_lr(cfg.lr));
    let mut best = (action_mse(&net, &hold_s, &hold_a)?, net.clone());
    let mut report = BcReport {
        train_pairs: train_idx.len(),
        holdout_pairs: n_hold,
        ..Default::default()
    };
    let mut since_best = 0;
    let mut running = 0.0;
    let mut batch_idx = vec![0usize; cfg.batch_size];
    for it in 1..=cfg.iterations {
        for b in batch_idx.iter_mut() {
            *b = rand::Rng::random_range(&mut rng, 0..train_idx.len());
        }
        let batch = ExpertBatch {
            states: select_rows(&train_s, &batch_idx),
            actions: select_rows(&train_a, &batch_idx),
        };
        let (g, loss) = bc_gradient(&net, &batch, 1.0)?;
        if !loss.is_finite() {
            return Err(Error::non_finite(format!("bc loss at iteration {it}")));
        }
        opt.step(&mut net, &g)?;
        running += loss;
        report.iterations = it;
        if it % cfg.eval_every == 0 {
            let hold = action_mse(&net, &hold_s, &hold_a)?;
            report.curve.push((it, running / cfg.eval_every as f64, hold));
            running = 0.0;
            if hold < best.0 {
                best = (hold, net.clone());
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        }
    }
    report.holdout_loss = best.0;
    Ok((best.1, report))
}
