//! The pursuit-lock-launch MDP on top of [`crate::flightsim`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flightsim::{
    launch_missile, spawn_engagement, step_aircraft, step_missile, step_opponent,
    AircraftState, Controls, MissileState, OpponentMode, SimConfig, Vec3,
};

pub const OBS_DIM: usize = 13;
pub const ACTION_DIM: usize = 4;

pub const DISTANCE_COEF: f64 = -1e-4;
pub const LOCK_COEF: f64 = -10.0;
pub const SUCCESS_REWARD: f64 = 800.0;
pub const ALTITUDE_PENALTY: f64 = -4.0;
pub const ALTITUDE_FLOOR: f64 = 2000.0;
pub const ALTITUDE_CEILING: f64 = 7000.0;
pub const LAUNCH_PENALTY: f64 = -6.0;

/// Continuous actions are clamped to this magnitude so they stay strictly
/// inside `(-1, 1)`.
pub const ACTION_BOUND: f64 = 1.0 - 1e-6;

/// Raw observation, logged and stored unscaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub delta_position: [f64; 3],
    pub our_euler: [f64; 3],
    pub locking_angle: f64,
    pub locking_status: f64,
    pub missile_status: f64,
    pub opp_euler: [f64; 3],
    pub opp_health: f64,
}

impl Observation {
    pub const POSITION_SCALE: f64 = 10_000.0;

    pub fn to_array(&self) -> [f64; OBS_DIM] {
        let d = self.delta_position;
        let o = self.our_euler;
        let e = self.opp_euler;
        [
            d[0],
            d[1],
            d[2],
            o[0],
            o[1],
            o[2],
            self.locking_angle,
            self.locking_status,
            self.missile_status,
            e[0],
            e[1],
            e[2],
            self.opp_health,
        ]
    }

    pub fn from_array(a: &[f64; OBS_DIM]) -> Self {
        Observation {
            delta_position: [a[0], a[1], a[2]],
            our_euler: [a[3], a[4], a[5]],
            locking_angle: a[6],
            locking_status: a[7],
            missile_status: a[8],
            opp_euler: [a[9], a[10], a[11]],
            opp_health: a[12],
        }
    }

    /// Network-input scaling: deltas / 10 km, angles / pi, locking angle / 180.
    pub fn scaled(&self) -> [f64; OBS_DIM] {
        scale_observation(&self.to_array())
    }

    pub fn distance(&self) -> f64 {
        let d = self.delta_position;
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn is_locked(&self) -> bool {
        self.locking_status > 0.5
    }

    pub fn missile_available(&self) -> bool {
        self.missile_status > 0.5
    }
}

pub fn scale_observation(raw: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
    let mut s = *raw;
    for v in &mut s[0..3] {
        *v /= Observation::POSITION_SCALE;
    }
    for i in [3, 4, 5, 9, 10, 11] {
        s[i] /= PI;
    }
    s[6] /= 180.0;
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub rudder: f64,
    pub elevator: f64,
    pub aileron: f64,
    /// Exactly `-1.0` (hold) or `1.0` (launch).
    pub launch: f64,
}

impl Action {
    /// Decodes a raw 4-vector: continuous parts are clamped, the launch part is
    /// thresholded at zero.
    pub fn from_raw(raw: &[f64; ACTION_DIM]) -> Self {
        let clamp = |v: f64| {
            if v.is_nan() {
                0.0
            } else {
                v.clamp(-ACTION_BOUND, ACTION_BOUND)
            }
        };
        Action {
            rudder: clamp(raw[0]),
            elevator: clamp(raw[1]),
            aileron: clamp(raw[2]),
            launch: if raw[3] > 0.0 { 1.0 } else { -1.0 },
        }
    }

    pub fn to_array(&self) -> [f64; ACTION_DIM] {
        [self.rudder, self.elevator, self.aileron, self.launch]
    }

    pub fn controls(&self) -> Controls {
        Controls::new(self.rudder, self.elevator, self.aileron)
    }

    pub fn wants_launch(&self) -> bool {
        self.launch > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    MissileHit,
    RamKill,
    Timeout,
    OurCrash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LockRewardUnits {
    #[default]
    Radians,
    Degrees,
}

/// Lock condition: `min < |D| < max`, `q < max_angle`, held for `hold_seconds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LockParams {
    pub min_distance: f64,
    pub max_distance: f64,
    pub max_angle_deg: f64,
    pub hold_seconds: f64,
}

impl Default for LockParams {
    fn default() -> Self {
        LockParams {
            min_distance: 100.0,
            max_distance: 3000.0,
            max_angle_deg: 15.0,
            hold_seconds: 5.0,
        }
    }
}

impl LockParams {
    /// Consecutive steps needed before the lock is achieved.
    pub fn required_steps(&self, dt: f64) -> u32 {
        (self.hold_seconds / dt - 1e-9).ceil().max(1.0) as u32
    }

    pub fn condition(&self, dist: f64, q_deg: f64) -> bool {
        dist > self.min_distance && dist < self.max_distance && q_deg < self.max_angle_deg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub horizon_straight: u64,
    pub horizon_serpentine: u64,
    pub horizon_circling: u64,
    pub lock: LockParams,
    pub lock_reward_units: LockRewardUnits,
    /// Evaluation-only: every launch (while no missile is in flight) spawns a
    /// fresh missile.
    pub unlimited_missiles: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            horizon_straight: 1500,
            horizon_serpentine: 1500,
            horizon_circling: 1900,
            lock: LockParams::default(),
            lock_reward_units: LockRewardUnits::Radians,
            unlimited_missiles: false,
        }
    }
}

impl EnvConfig {
    pub fn horizon(&self, mode: &OpponentMode) -> u64 {
        match mode {
            OpponentMode::Straight => self.horizon_straight,
            OpponentMode::Serpentine { .. } => self.horizon_serpentine,
            OpponentMode::Circling { .. } => self.horizon_circling,
        }
    }

    /// Sets the same horizon for every opponent mode.
    pub fn with_horizon(mut self, t: u64) -> Self {
        self.horizon_straight = t;
        self.horizon_serpentine = t;
        self.horizon_circling = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_straight == 0 || self.horizon_serpentine == 0 || self.horizon_circling == 0
        {
            return Err(Error::Config("episode horizons must be positive".into()));
        }
        let l = &self.lock;
        if !(l.min_distance >= 0.0 && l.max_distance > l.min_distance && l.max_angle_deg > 0.0)
            || !(l.hold_seconds > 0.0)
        {
            return Err(Error::Config("invalid lock parameters".into()));
        }
        Ok(())
    }
}

/// Angle in degrees between our velocity and the line of sight `relative`.
pub fn locking_angle(our_velocity: Vec3, relative: Vec3) -> Result<f64> {
    let nv = our_velocity.norm();
    let nd = relative.norm();
    if !(nv > 0.0 && nd > 0.0) || !nv.is_finite() || !nd.is_finite() {
        return Err(Error::InvalidInput(
            "locking angle needs non-degenerate vectors".into(),
        ));
    }
    let c = (relative.dot(our_velocity) / (nd * nv)).clamp(-1.0, 1.0);
    Ok(c.acos() * 180.0 / PI)
}

/// Advances the lock hold counter; returns `(locked, new_hold)`.
pub fn update_lock(dist: f64, q_deg: f64, prev_hold: u32, dt: f64) -> (bool, u32) {
    update_lock_with(&LockParams::default(), dist, q_deg, prev_hold, dt)
}

pub fn update_lock_with(
    params: &LockParams,
    dist: f64,
    q_deg: f64,
    prev_hold: u32,
    dt: f64,
) -> (bool, u32) {
    let hold = if params.condition(dist, q_deg) {
        prev_hold.saturating_add(1)
    } else {
        0
    };
    (hold >= params.required_steps(dt), hold)
}

/// Per-step reward split into its five terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerms {
    pub distance: f64,
    pub lock: f64,
    pub success: f64,
    pub altitude: f64,
    pub launch: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.distance + self.lock + self.success + self.altitude + self.launch
    }
}

/// Launch (`fired`) and hit (`hit`) flags for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepEvents {
    pub fired: bool,
    pub hit: bool,
}

pub fn compute_reward(
    events: StepEvents,
    dist: f64,
    q_deg: f64,
    our_altitude: f64,
    units: LockRewardUnits,
) -> RewardTerms {
    let q = match units {
        LockRewardUnits::Radians => q_deg.to_radians(),
        LockRewardUnits::Degrees => q_deg,
    };
    RewardTerms {
        distance: DISTANCE_COEF * dist,
        lock: LOCK_COEF * q,
        success: if events.hit { SUCCESS_REWARD } else { 0.0 },
        altitude: if our_altitude > ALTITUDE_CEILING || our_altitude < ALTITUDE_FLOOR {
            ALTITUDE_PENALTY
        } else {
            0.0
        },
        launch: if events.fired { LAUNCH_PENALTY } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementState {
    pub ours: AircraftState,
    pub opponent: AircraftState,
    pub missile: MissileState,
    pub lock_hold: u32,
    pub locked: bool,
    pub step: u64,
    pub mode: OpponentMode,
    pub done: bool,
    pub outcome: Option<Outcome>,
    pub launches: u32,
    pub hits: u32,
}

impl EngagementState {
    pub fn relative_position(&self) -> Vec3 {
        self.opponent.position - self.ours.position
    }

    pub fn distance(&self) -> f64 {
        self.relative_position().norm()
    }

    /// Locking angle in degrees; 0 when the aircraft coincide.
    pub fn locking_angle(&self) -> f64 {
        locking_angle(self.ours.velocity(), self.relative_position()).unwrap_or(0.0)
    }

    /// Whether a launch command would fire a missile now.
    pub fn missile_available(&self, unlimited: bool) -> bool {
        if unlimited {
            !self.missile.active
        } else {
            !self.missile.expended
        }
    }

    pub fn observation(&self, unlimited: bool) -> Observation {
        let d = self.relative_position();
        let o = self.ours.attitude;
        let e = self.opponent.attitude;
        Observation {
            delta_position: [d.x, d.y, d.z],
            our_euler: [o.roll, o.pitch, o.yaw],
            locking_angle: self.locking_angle(),
            locking_status: if self.locked { 1.0 } else { 0.0 },
            missile_status: if self.missile_available(unlimited) { 1.0 } else { 0.0 },
            opp_euler: [e.roll, e.pitch, e.yaw],
            opp_health: self.opponent.health,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub reward_terms: RewardTerms,
    pub done: bool,
    pub outcome: Option<Outcome>,
    pub launched: bool,
    pub hit: bool,
}

/// One engagement: simulator state plus the configuration it runs under.
#[derive(Debug, Clone)]
pub struct Engagement {
    pub sim: SimConfig,
    pub cfg: EnvConfig,
    state: EngagementState,
}

impl Engagement {
    pub fn new(sim: SimConfig, cfg: EnvConfig, mode: OpponentMode, seed: u64) -> Result<Self> {
        let state = initial_state(&sim, mode, seed)?;
        cfg.validate()?;
        Ok(Engagement { sim, cfg, state })
    }

    pub fn reset(&mut self, mode: OpponentMode, seed: u64) -> Result<Observation> {
        self.state = initial_state(&self.sim, mode, seed)?;
        Ok(self.observation())
    }

    pub fn state(&self) -> &EngagementState {
        &self.state
    }

    pub fn observation(&self) -> Observation {
        self.state.observation(self.cfg.unlimited_missiles)
    }

    pub fn horizon(&self) -> u64 {
        self.cfg.horizon(&self.state.mode)
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult> {
        let (state, result) = env_step(&self.state, action, &self.sim, &self.cfg)?;
        self.state = state;
        Ok(result)
    }
}

fn initial_state(sim: &SimConfig, mode: OpponentMode, seed: u64) -> Result<EngagementState> {
    let (ours, opponent) = spawn_engagement(&mode, sim, seed)?;
    Ok(EngagementState {
        ours,
        opponent,
        missile: MissileState::ready(),
        lock_hold: 0,
        locked: false,
        step: 0,
        mode,
        done: false,
        outcome: None,
        launches: 0,
        hits: 0,
    })
}

/// Pure transition function of the MDP.
pub fn env_step(
    state: &EngagementState,
    action: &Action,
    sim: &SimConfig,
    cfg: &EnvConfig,
) -> Result<(EngagementState, StepResult)> {
    if state.done {
        return Err(Error::EpisodeDone);
    }
    let action = Action::from_raw(&action.to_array());
    let dt = sim.dt;
    let limits = &sim.max_turn_rates;
    let mut next = state.clone();

    let mut events = StepEvents::default();
    if action.wants_launch() && state.missile_available(cfg.unlimited_missiles) {
        let mut rail = state.missile;
        if cfg.unlimited_missiles {
            rail = MissileState::ready();
        }
        next.missile = launch_missile(&state.ours, &rail, state.locked, sim);
        next.launches += 1;
        events.fired = true;
    }

    next.ours = step_aircraft(&state.ours, action.controls(), dt, limits)?;
    next.opponent = step_opponent(&state.opponent, &state.mode, state.step, dt, limits)?;
    if next.missile.active {
        let (m, hit) = step_missile(&next.missile, &state.opponent, dt, sim)?;
        next.missile = m;
        events.hit = hit;
    }

    let rel = next.relative_position();
    let dist = rel.norm();
    let rammed = !events.hit && dist <= sim.collision_radius;
    if events.hit {
        next.hits += 1;
        next.opponent.kill();
    } else if rammed {
        next.opponent.kill();
    }

    let q = next.locking_angle();
    let (locked, hold) = update_lock_with(&cfg.lock, dist, q, state.lock_hold, dt);
    next.locked = locked;
    next.lock_hold = hold;
    next.step = state.step + 1;

    let outcome = if events.hit {
        Some(Outcome::MissileHit)
    } else if rammed {
        Some(Outcome::RamKill)
    } else if next.ours.position.z < 0.0 {
        Some(Outcome::OurCrash)
    } else if next.step >= cfg.horizon(&state.mode) {
        Some(Outcome::Timeout)
    } else {
        None
    };
    next.done = outcome.is_some();
    next.outcome = outcome;

    let terms = compute_reward(events, dist, q, next.ours.position.z, cfg.lock_reward_units);
    let result = StepResult {
        observation: next.observation(cfg.unlimited_missiles),
        reward: terms.total(),
        reward_terms: terms,
        done: next.done,
        outcome,
        launched: events.fired,
        hit: events.hit,
    };
    Ok((next, result))
}
