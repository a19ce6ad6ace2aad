//! Noiseless policy evaluation and per-step trajectory export.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Engagement, EngagementState, EnvConfig, Outcome, StepResult};
use crate::error::Result;
use crate::flightsim::{OpponentMode, SimConfig};
use crate::policy::Policy;

/// One exported step. Field order is the file's column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub our_x: f64,
    pub our_y: f64,
    pub our_z: f64,
    pub our_roll: f64,
    pub our_pitch: f64,
    pub our_yaw: f64,
    pub opp_x: f64,
    pub opp_y: f64,
    pub opp_z: f64,
    pub dist: f64,
    pub q_deg: f64,
    pub locked: bool,
    pub missile_active: bool,
    pub launch_event: bool,
    pub reward: f64,
}

impl TrajectoryRecord {
    fn from_step(state: &EngagementState, res: &StepResult) -> Self {
        let o = &state.ours;
        let e = &state.opponent;
        TrajectoryRecord {
            t: state.step,
            our_x: o.position.x,
            our_y: o.position.y,
            our_z: o.position.z,
            our_roll: o.attitude.roll,
            our_pitch: o.attitude.pitch,
            our_yaw: o.attitude.yaw,
            opp_x: e.position.x,
            opp_y: e.position.y,
            opp_z: e.position.z,
            dist: state.distance(),
            q_deg: state.locking_angle(),
            locked: state.locked,
            missile_active: state.missile.active,
            launch_event: res.launched,
            reward: res.reward,
        }
    }
}

pub fn write_trajectory<W: Write>(mut w: W, steps: &[TrajectoryRecord]) -> Result<()> {
    for r in steps {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub outcome: Outcome,
    pub episode_return: f64,
    pub length: u64,
    pub launches: u32,
    pub hits: u32,
    /// Present when recording was requested; one record per step taken.
    pub trajectory: Option<Vec<TrajectoryRecord>>,
}

/// Flies one episode with `policy`, optionally recording every step.
pub fn run_episode<P: Policy + ?Sized>(
    policy: &mut P,
    sim: &SimConfig,
    env_cfg: &EnvConfig,
    mode: OpponentMode,
    seed: u64,
    record: bool,
) -> Result<EpisodeSummary> {
    let mut env = Engagement::new(sim.clone(), env_cfg.clone(), mode, seed)?;
    policy.reset();
    let mut obs = env.observation();
    let mut ret = 0.0;
    let mut traj = record.then(Vec::new);
    loop {
        let a = policy.act(&obs);
        let res = env.step(&a)?;
        ret += res.reward;
        if let Some(t) = traj.as_mut() {
            t.push(TrajectoryRecord::from_step(env.state(), &res));
        }
        obs = res.observation;
        if res.done {
            let s = env.state();
            return Ok(EpisodeSummary {
                seed,
                outcome: res.outcome.expect("finished episode"),
                episode_return: ret,
                length: s.step,
                launches: s.launches,
                hits: s.hits,
                trajectory: traj,
            });
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    /// Fraction of episodes ending in a missile hit. Ram kills do not count.
    pub success_rate: f64,
    pub ram_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_length: f64,
    pub launches: u64,
    pub hits: u64,
    /// `hits / launches`; reported for unlimited-missile runs.
    pub launch_efficiency: Option<f64>,
}

impl EvalReport {
    pub fn from_episodes(eps: &[EpisodeSummary], unlimited: bool) -> Self {
        let n = eps.len();
        if n == 0 {
            return EvalReport::default();
        }
        let nf = n as f64;
        let rate = |o: Outcome| eps.iter().filter(|e| e.outcome == o).count() as f64 / nf;
        let mean_return = eps.iter().map(|e| e.episode_return).sum::<f64>() / nf;
        let var = eps
            .iter()
            .map(|e| (e.episode_return - mean_return).powi(2))
            .sum::<f64>()
            / nf;
        let launches: u64 = eps.iter().map(|e| e.launches as u64).sum();
        let hits: u64 = eps.iter().map(|e| e.hits as u64).sum();
        EvalReport {
            episodes: n,
            success_rate: rate(Outcome::MissileHit),
            ram_rate: rate(Outcome::RamKill),
            crash_rate: rate(Outcome::OurCrash),
            timeout_rate: rate(Outcome::Timeout),
            mean_return,
            std_return: var.sqrt(),
            mean_length: eps.iter().map(|e| e.length as f64).sum::<f64>() / nf,
            launches,
            hits,
            launch_efficiency: (unlimited && launches > 0).then(|| hits as f64 / launches as f64),
        }
    }
}

/// Runs one episode per seed in parallel; each worker gets its own copy of
/// the policy.
pub fn evaluate_episodes<P: Policy + Clone + Sync>(
    policy: &P,
    sim: &SimConfig,
    env_cfg: &EnvConfig,
    mode: OpponentMode,
    seeds: &[u64],
    record: bool,
) -> Result<Vec<EpisodeSummary>> {
    seeds
        .par_iter()
        .map(|&s| run_episode(&mut policy.clone(), sim, env_cfg, mode, s, record))
        .collect()
}

pub fn evaluate<P: Policy + Clone + Sync>(
    policy: &P,
    sim: &SimConfig,
    env_cfg: &EnvConfig,
    mode: OpponentMode,
    seeds: &[u64],
) -> Result<EvalReport> {
    let eps = evaluate_episodes(policy, sim, env_cfg, mode, seeds, false)?;
    Ok(EvalReport::from_episodes(&eps, env_cfg.unlimited_missiles))
}
