//! Kinematic engagement simulator: two constant-speed aircraft and a single
//! guided missile.
//!
//! Frames and conventions:
//!
//! * World axes are `x` north, `y` east, `z` up (altitude in meters).
//! * Attitude is intrinsic yaw, pitch, roll (Z-Y'-X''). Yaw is the heading
//!   measured clockwise from north, pitch is positive nose-up and roll is
//!   positive right-wing-down.
//! * Control surfaces command body-axis rates: aileron drives roll rate,
//!   elevator drives pitch rate and rudder drives yaw rate, each scaled by the
//!   configured maximum. Body rates are mapped to Euler-angle rates with the
//!   standard kinematic equations and integrated with one explicit Euler step.
//!   With wings level this reduces to `yaw' = rudder * max_yaw_rate` and
//!   `pitch' = elevator * max_pitch_rate`.
//! * Speed never changes; position advances along the forward axis of the
//!   attitude held at the start of the step.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity used to size coordinated turns.
pub const GRAVITY: f64 = 9.81;

/// Margin keeping pitch away from the +-90 degree gimbal singularity.
pub const PITCH_LIMIT_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Attitude {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Attitude {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Attitude { roll, pitch, yaw }.normalized()
    }

    /// Re-establishes the wrap/clamp invariants.
    pub fn normalized(self) -> Self {
        let lim = PI / 2.0 - PITCH_LIMIT_MARGIN;
        Attitude {
            roll: wrap_angle(self.roll),
            pitch: self.pitch.clamp(-lim, lim),
            yaw: wrap_angle(self.yaw),
        }
    }

    /// Unit vector along the body nose.
    pub fn forward(&self) -> Vec3 {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        Vec3::new(cp * cy, cp * sy, sp)
    }

    pub fn is_normalized(&self) -> bool {
        let lim = PI / 2.0 - PITCH_LIMIT_MARGIN;
        self.roll > -PI
            && self.roll <= PI
            && self.yaw > -PI
            && self.yaw <= PI
            && self.pitch >= -lim
            && self.pitch <= lim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub position: Vec3,
    pub attitude: Attitude,
    pub speed: f64,
    pub alive: bool,
    pub health: f64,
}

impl AircraftState {
    pub fn new(position: Vec3, attitude: Attitude, speed: f64) -> Self {
        AircraftState {
            position,
            attitude: attitude.normalized(),
            speed,
            alive: true,
            health: 1.0,
        }
    }

    pub fn velocity(&self) -> Vec3 {
        self.attitude.forward() * self.speed
    }

    pub fn kill(&mut self) {
        self.alive = false;
        self.health = 0.0;
    }
}

/// Control-surface deflections, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Controls {
    pub rudder: f64,
    pub elevator: f64,
    pub aileron: f64,
}

impl Controls {
    pub const NEUTRAL: Controls = Controls {
        rudder: 0.0,
        elevator: 0.0,
        aileron: 0.0,
    };

    pub fn new(rudder: f64, elevator: f64, aileron: f64) -> Self {
        Controls {
            rudder,
            elevator,
            aileron,
        }
    }

    fn is_finite(&self) -> bool {
        self.rudder.is_finite() && self.elevator.is_finite() && self.aileron.is_finite()
    }
}

/// Maximum body rates in rad/s reached at full deflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnRates {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Default for TurnRates {
    fn default() -> Self {
        TurnRates {
            yaw: 0.4,
            pitch: 0.4,
            roll: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MissileState {
    pub active: bool,
    pub position: Vec3,
    pub velocity: Vec3,
    pub guided: bool,
    pub time_of_flight: f64,
    pub expended: bool,
}

impl MissileState {
    /// A missile still on the rail.
    pub fn ready() -> Self {
        MissileState::default()
    }
}

/// How the opponent flies for a whole episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum OpponentMode {
    Straight,
    /// Square-wave rudder of the given amplitude and period (seconds).
    Serpentine { amplitude: f64, period: f64 },
    /// Level coordinated turn at the given bank angle (radians).
    Circling { bank: f64 },
}

impl OpponentMode {
    pub fn straight() -> Self {
        OpponentMode::Straight
    }

    pub fn serpentine() -> Self {
        OpponentMode::Serpentine {
            amplitude: 0.6,
            period: 20.0,
        }
    }

    pub fn circling() -> Self {
        OpponentMode::Circling {
            bank: 60f64.to_radians(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OpponentMode::Straight => "straight",
            OpponentMode::Serpentine { .. } => "serpentine",
            OpponentMode::Circling { .. } => "circling",
        }
    }

    /// Parses `straight`, `serpentine` or `circling` with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "straight" => Ok(Self::straight()),
            "serpentine" => Ok(Self::serpentine()),
            "circling" => Ok(Self::circling()),
            other => Err(Error::Config(format!("unknown opponent mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub our_speed: f64,
    pub opponent_speed: f64,
    pub missile_speed: f64,
    pub missile_lifetime: f64,
    /// Lateral acceleration cap of the missile guidance (m/s^2).
    pub missile_max_accel: f64,
    pub hit_radius: f64,
    pub collision_radius: f64,
    pub max_turn_rates: TurnRates,
    /// Our spawn distance range from the opponent (m).
    pub spawn_shell: (f64, f64),
    /// Half-angle of the cone behind the opponent that spawns are drawn from.
    pub spawn_cone_deg: f64,
    /// Our initial heading is within this many degrees of the opponent.
    pub heading_jitter_deg: f64,
    pub altitude_band: (f64, f64),
    pub opponent_start: Vec3,
    pub opponent_heading: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.1,
            our_speed: 300.0,
            opponent_speed: 240.0,
            missile_speed: 600.0,
            missile_lifetime: 20.0,
            missile_max_accel: 400.0,
            hit_radius: 50.0,
            collision_radius: 20.0,
            max_turn_rates: TurnRates::default(),
            spawn_shell: (3500.0, 5000.0),
            spawn_cone_deg: 45.0,
            heading_jitter_deg: 30.0,
            altitude_band: (2000.0, 7000.0),
            opponent_start: Vec3::new(0.0, 0.0, 4500.0),
            opponent_heading: 0.0,
            seed: 0,
        }
    }
}

/// Upper bound of the lock range; spawns must start outside it.
pub const LOCK_RANGE_MAX: f64 = 3000.0;

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let positive = [
            ("dt", self.dt),
            ("our_speed", self.our_speed),
            ("opponent_speed", self.opponent_speed),
            ("missile_speed", self.missile_speed),
            ("missile_lifetime", self.missile_lifetime),
            ("missile_max_accel", self.missile_max_accel),
            ("hit_radius", self.hit_radius),
            ("collision_radius", self.collision_radius),
            ("max_turn_rates.yaw", self.max_turn_rates.yaw),
            ("max_turn_rates.pitch", self.max_turn_rates.pitch),
            ("max_turn_rates.roll", self.max_turn_rates.roll),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.our_speed <= self.opponent_speed {
            return bad("our_speed must exceed opponent_speed for pursuit to be feasible");
        }
        let (lo, hi) = self.spawn_shell;
        if !(lo > LOCK_RANGE_MAX && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!(
                "spawn_shell ({lo}, {hi}) must satisfy {LOCK_RANGE_MAX} < min <= max"
            )));
        }
        let (zlo, zhi) = self.altitude_band;
        if !(zlo.is_finite() && zhi.is_finite() && zlo < zhi) {
            return bad("altitude_band must be a non-empty interval");
        }
        if !(self.opponent_start.z >= zlo && self.opponent_start.z <= zhi) {
            return bad("opponent start altitude lies outside altitude_band, the spawn shell cannot satisfy it");
        }
        if !(self.spawn_cone_deg > 0.0 && self.spawn_cone_deg <= 180.0) {
            return bad("spawn_cone_deg must be in (0, 180]");
        }
        if !(self.heading_jitter_deg >= 0.0 && self.heading_jitter_deg < 90.0) {
            return bad("heading_jitter_deg must be in [0, 90)");
        }
        Ok(())
    }

    /// Minimum straight-line distance a missile can cover during its life.
    pub fn missile_range(&self) -> f64 {
        self.missile_speed * self.missile_lifetime
    }
}

/// Advances one aircraft by `dt` given control deflections.
pub fn step_aircraft(
    state: &AircraftState,
    controls: Controls,
    dt: f64,
    limits: &TurnRates,
) -> Result<AircraftState> {
    if !state.alive {
        return Err(Error::InvalidInput("cannot step a destroyed aircraft".into()));
    }
    if !controls.is_finite() {
        return Err(Error::non_finite("aircraft controls"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }

    let p = controls.aileron.clamp(-1.0, 1.0) * limits.roll;
    let q = controls.elevator.clamp(-1.0, 1.0) * limits.pitch;
    let r = controls.rudder.clamp(-1.0, 1.0) * limits.yaw;

    let att = state.attitude;
    let (sr, cr) = att.roll.sin_cos();
    let (tp, cp) = (att.pitch.tan(), att.pitch.cos());
    let roll_rate = p + (q * sr + r * cr) * tp;
    let pitch_rate = q * cr - r * sr;
    let yaw_rate = (q * sr + r * cr) / cp;

    let mut next = *state;
    next.position = state.position + att.forward() * (state.speed * dt);
    next.attitude = Attitude {
        roll: att.roll + roll_rate * dt,
        pitch: att.pitch + pitch_rate * dt,
        yaw: att.yaw + yaw_rate * dt,
    }
    .normalized();
    Ok(next)
}

/// Sign of a square wave that starts positive and switches every half period.
fn square_wave(step: u64, dt: f64, period: f64) -> f64 {
    let half = ((period / (2.0 * dt)).round() as u64).max(1);
    if step == 0 {
        0.0
    } else if ((step - 1) / half) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Control deflections the scripted opponent applies at `step`.
pub fn opponent_controls(
    state: &AircraftState,
    mode: &OpponentMode,
    step: u64,
    dt: f64,
    limits: &TurnRates,
) -> Controls {
    let att = state.attitude;
    // Proportional hold that removes the error within one step when possible.
    let hold = |err: f64, rate: f64| (err / (rate * dt)).clamp(-1.0, 1.0);
    match *mode {
        OpponentMode::Straight => Controls::NEUTRAL,
        OpponentMode::Serpentine { amplitude, period } => Controls {
            rudder: amplitude * square_wave(step, dt, period),
            elevator: hold(-att.pitch, limits.pitch),
            aileron: hold(-att.roll, limits.roll),
        },
        OpponentMode::Circling { bank } => {
            // A level turn at bank phi turns at omega = g tan(phi) / v; the
            // body rates q = omega sin(phi), r = omega cos(phi) keep pitch
            // constant while heading advances at omega.
            let phi = att.roll;
            let omega = GRAVITY * phi.tan() / state.speed;
            Controls {
                rudder: omega * phi.cos() / limits.yaw,
                elevator: omega * phi.sin() / limits.pitch,
                aileron: hold(wrap_angle(bank - phi), limits.roll),
            }
        }
    }
}

/// Advances the scripted opponent by one step.
pub fn step_opponent(
    state: &AircraftState,
    mode: &OpponentMode,
    step: u64,
    dt: f64,
    limits: &TurnRates,
) -> Result<AircraftState> {
    let controls = opponent_controls(state, mode, step, dt, limits);
    step_aircraft(state, controls, dt, limits)
}

/// Closest approach between two points moving linearly over one step.
fn segment_min_distance(rel_start: Vec3, rel_delta: Vec3) -> f64 {
    let dd = rel_delta.dot(rel_delta);
    let s = if dd > 0.0 {
        (-rel_start.dot(rel_delta) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (rel_start + rel_delta * s).norm()
}

/// Rotates unit vector `from` toward unit vector `to` by at most `max_angle`.
fn rotate_toward(from: Vec3, to: Vec3, max_angle: f64) -> Vec3 {
    let cos_a = from.dot(to).clamp(-1.0, 1.0);
    let angle = cos_a.acos();
    if angle <= max_angle {
        return to;
    }
    // Component of `to` orthogonal to `from`; degenerate when anti-parallel.
    let ortho = (to - from * cos_a).normalized().unwrap_or_else(|| {
        let helper = if from.z.abs() < 0.9 {
            Vec3::new(0.0, 0.0, 1.0)
        } else {
            Vec3::new(1.0, 0.0, 0.0)
        };
        from.cross(helper).normalized().unwrap_or(Vec3::new(0.0, 1.0, 0.0))
    });
    let (s, c) = max_angle.sin_cos();
    from * c + ortho * s
}

/// Advances an active missile by `dt` against `target`'s state at the start
/// of the step. The target is propagated linearly for the hit test.
pub fn step_missile(
    missile: &MissileState,
    target: &AircraftState,
    dt: f64,
    cfg: &SimConfig,
) -> Result<(MissileState, bool)> {
    if !missile.active {
        return Err(Error::InvalidInput("cannot step an inactive missile".into()));
    }
    let mut next = *missile;
    if missile.guided {
        let speed = missile.velocity.norm();
        if let (Some(dir), Some(los)) = (
            missile.velocity.normalized(),
            (target.position - missile.position).normalized(),
        ) {
            let max_turn = cfg.missile_max_accel / speed * dt;
            next.velocity = rotate_toward(dir, los, max_turn) * speed;
        }
    }
    next.position = missile.position + next.velocity * dt;
    next.time_of_flight += dt;

    let hit = target.alive && {
        let target_next = target.position + target.velocity() * dt;
        let rel_start = missile.position - target.position;
        let rel_delta = (next.position - missile.position) - (target_next - target.position);
        segment_min_distance(rel_start, rel_delta) <= cfg.hit_radius
    };
    if hit || next.time_of_flight > cfg.missile_lifetime {
        next.active = false;
    }
    Ok((next, hit))
}

/// Fires the missile from `shooter`. A missile that is already expended is
/// returned unchanged.
pub fn launch_missile(
    shooter: &AircraftState,
    missile: &MissileState,
    locked: bool,
    cfg: &SimConfig,
) -> MissileState {
    if missile.expended {
        return *missile;
    }
    MissileState {
        active: true,
        position: shooter.position,
        velocity: shooter.attitude.forward() * cfg.missile_speed,
        guided: locked,
        time_of_flight: 0.0,
        expended: true,
    }
}

/// Initial opponent and own-ship states for one episode.
///
/// The opponent always starts at the configured position and heading. Our
/// aircraft is drawn uniformly by volume from the spawn shell, restricted to a
/// cone behind the opponent and to the altitude band (rejection sampling), and
/// points at the opponent up to a random heading offset.
pub fn spawn_engagement(
    mode: &OpponentMode,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(AircraftState, AircraftState)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let opp_roll = match mode {
        OpponentMode::Circling { bank } => *bank,
        _ => 0.0,
    };
    let opponent = AircraftState::new(
        cfg.opponent_start,
        Attitude::new(opp_roll, 0.0, cfg.opponent_heading),
        cfg.opponent_speed,
    );

    let back = -Attitude::new(0.0, 0.0, cfg.opponent_heading).forward();
    let e1 = back.cross(Vec3::new(0.0, 0.0, 1.0)).normalized().unwrap();
    let e2 = e1.cross(back);
    let (rmin, rmax) = cfg.spawn_shell;
    let cos_cone = cfg.spawn_cone_deg.to_radians().cos();
    let (zlo, zhi) = cfg.altitude_band;

    const MAX_ATTEMPTS: usize = 10_000;
    for _ in 0..MAX_ATTEMPTS {
        let u: f64 = rng.random();
        let r = (rmin.powi(3) + u * (rmax.powi(3) - rmin.powi(3))).cbrt();
        let cos_a = 1.0 - rng.random::<f64>() * (1.0 - cos_cone);
        let sin_a = (1.0 - cos_a * cos_a).max(0.0).sqrt();
        let beta = rng.random::<f64>() * TAU;
        let dir = back * cos_a + (e1 * beta.cos() + e2 * beta.sin()) * sin_a;
        let position = opponent.position + dir * r;
        let jitter = (rng.random::<f64>() * 2.0 - 1.0) * cfg.heading_jitter_deg.to_radians();
        if position.z < zlo || position.z > zhi {
            continue;
        }
        let d = opponent.position - position;
        let yaw = d.y.atan2(d.x) + jitter;
        let pitch = d.z.atan2(d.horizontal_norm());
        let ours = AircraftState::new(position, Attitude::new(0.0, pitch, yaw), cfg.our_speed);
        return Ok((ours, opponent));
    }
    Err(Error::Config(
        "no spawn inside the altitude band; widen altitude_band or shrink spawn_shell".into(),
    ))
}
