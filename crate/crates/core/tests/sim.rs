use std::f64::consts::PI;

use proptest::prelude::*;
use pursuit_rl::env::{
    compute_reward, env_step, update_lock, Action, Engagement, EnvConfig, LockRewardUnits,
    Outcome, StepEvents,
};
use pursuit_rl::flightsim::{
    spawn_engagement, step_aircraft, step_missile, step_opponent, AircraftState, Attitude,
    Controls, MissileState, OpponentMode, SimConfig, TurnRates, Vec3, GRAVITY,
};

/// Independent explicit-Euler integration of the body-rate kinematics.
fn hand_euler(s: &AircraftState, c: [f64; 3], dt: f64, l: &TurnRates) -> (Vec3, [f64; 3]) {
    let (phi, theta, psi) = (s.attitude.roll, s.attitude.pitch, s.attitude.yaw);
    let p = c[2] * l.roll;
    let q = c[1] * l.pitch;
    let r = c[0] * l.yaw;
    let phid = p + (q * phi.sin() + r * phi.cos()) * theta.tan();
    let thd = q * phi.cos() - r * phi.sin();
    let psid = (q * phi.sin() + r * phi.cos()) / theta.cos();
    let v = s.speed;
    let pos = Vec3::new(
        s.position.x + v * dt * theta.cos() * psi.cos(),
        s.position.y + v * dt * theta.cos() * psi.sin(),
        s.position.z + v * dt * theta.sin(),
    );
    (pos, [phi + phid * dt, theta + thd * dt, psi + psid * dt])
}

#[test]
fn kinematics_match_hand_integration() {
    let l = TurnRates::default();
    let s = AircraftState::new(Vec3::new(100.0, -50.0, 4000.0), Attitude::new(0.3, 0.2, 0.5), 300.0);
    let c = [0.4, -0.3, 0.2];
    let n = step_aircraft(&s, Controls::new(c[0], c[1], c[2]), 0.1, &l).unwrap();
    let (pos, att) = hand_euler(&s, c, 0.1, &l);
    assert!((n.position - pos).norm() < 1e-9);
    assert!((n.attitude.roll - att[0]).abs() < 1e-12);
    assert!((n.attitude.pitch - att[1]).abs() < 1e-12);
    assert!((n.attitude.yaw - att[2]).abs() < 1e-12);
}

#[test]
fn circling_opponent_closes_its_circle() {
    let cfg = SimConfig::default();
    let mode = OpponentMode::circling();
    let (_, mut opp) = spawn_engagement(&mode, &cfg, 0).unwrap();
    let start = opp.position;
    let bank = 60f64.to_radians();
    let omega = GRAVITY * bank.tan() / cfg.opponent_speed;
    let radius = cfg.opponent_speed / omega;
    let period_steps = (2.0 * PI / omega / cfg.dt).round() as u64;
    let mut max_dev: f64 = 0.0;
    let mut far: f64 = 0.0;
    for step in 0..period_steps {
        opp = step_opponent(&opp, &mode, step, cfg.dt, &cfg.max_turn_rates).unwrap();
        max_dev = max_dev.max((opp.position.z - start.z).abs());
        far = far.max((opp.position - start).norm());
    }
    // Back near the start after one period, diameter ~ 2 v / omega, level.
    assert!((opp.position - start).norm() < 0.01 * radius * 2.0 * PI);
    assert!((far - 2.0 * radius).abs() < 0.01 * 2.0 * radius, "far {far} vs {}", 2.0 * radius);
    assert!(max_dev < 1.0);
}

#[test]
fn serpentine_opponent_stays_level_and_weaves() {
    let cfg = SimConfig::default();
    let mode = OpponentMode::serpentine();
    let (_, mut opp) = spawn_engagement(&mode, &cfg, 3).unwrap();
    let mut min_y: f64 = 0.0;
    let mut max_y: f64 = 0.0;
    for step in 0..=400 {
        opp = step_opponent(&opp, &mode, step, cfg.dt, &cfg.max_turn_rates).unwrap();
        min_y = min_y.min(opp.position.y);
        max_y = max_y.max(opp.position.y);
        assert!((opp.position.z - 4500.0).abs() < 1e-6);
    }
    assert!(max_y > 100.0 && min_y > -1e-6);
    assert!(opp.attitude.yaw.abs() < 1e-9, "full period returns to the base heading");
}

#[test]
fn tail_chase_missile_intercepts_on_schedule() {
    // Target 600 m ahead flying away at 240 m/s; missile at 600 m/s closes at
    // 360 m/s, reaching hit radius 50 after (600 - 50) / 360 s.
    let cfg = SimConfig::default();
    let target = AircraftState::new(Vec3::new(600.0, 0.0, 4000.0), Attitude::new(0.0, 0.0, 0.0), 240.0);
    let shooter = AircraftState::new(Vec3::new(0.0, 0.0, 4000.0), Attitude::new(0.0, 0.0, 0.0), 300.0);
    let mut m = pursuit_rl::flightsim::launch_missile(&shooter, &MissileState::ready(), true, &cfg);
    let mut t = target;
    let expect = ((600.0 - 50.0) / 360.0 / cfg.dt).ceil() as u32;
    for k in 1..=100 {
        let (next, hit) = step_missile(&m, &t, cfg.dt, &cfg).unwrap();
        t = step_aircraft(&t, Controls::NEUTRAL, cfg.dt, &cfg.max_turn_rates).unwrap();
        m = next;
        if hit {
            assert_eq!(k, expect);
            assert!(!m.active);
            return;
        }
    }
    panic!("no intercept");
}

#[test]
fn missile_expires_after_lifetime() {
    let cfg = SimConfig::default();
    let far = AircraftState::new(Vec3::new(0.0, 1e6, 4000.0), Attitude::new(0.0, 0.0, 0.0), 240.0);
    let shooter = AircraftState::new(Vec3::ZERO, Attitude::new(0.0, 0.0, PI), 300.0);
    let mut m = pursuit_rl::flightsim::launch_missile(&shooter, &MissileState::ready(), false, &cfg);
    let mut steps = 0;
    while m.active {
        m = step_missile(&m, &far, cfg.dt, &cfg).unwrap().0;
        steps += 1;
    }
    let nominal = (cfg.missile_lifetime / cfg.dt).round() as u32;
    assert!(steps == nominal || steps == nominal + 1, "steps {steps}");
}

#[test]
fn spawn_distribution_covers_shell_uniformly() {
    // A wide altitude band keeps rejection from biasing the radius.
    let cfg = SimConfig {
        altitude_band: (0.0, 10000.0),
        ..SimConfig::default()
    };
    let (rmin, rmax) = cfg.spawn_shell;
    let n = 4000;
    let mut inner_half = 0;
    let r_mid = ((rmin.powi(3) + rmax.powi(3)) / 2.0).cbrt();
    for seed in 0..n {
        let (ours, opp) = spawn_engagement(&OpponentMode::Straight, &cfg, seed).unwrap();
        let d = ours.position - opp.position;
        let r = d.norm();
        assert!(r >= rmin - 1e-6 && r <= rmax + 1e-6);
        if r < r_mid {
            inner_half += 1;
        }
    }
    // Half the shell volume lies inside r_mid.
    let frac = inner_half as f64 / n as f64;
    assert!((frac - 0.5).abs() < 0.04, "inner fraction {frac}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn aircraft_step_preserves_invariants(
        roll in -3.1f64..3.1, pitch in -1.5f64..1.5, yaw in -3.1f64..3.1,
        r in -1.0f64..1.0, e in -1.0f64..1.0, a in -1.0f64..1.0,
    ) {
        let s = AircraftState::new(Vec3::new(0.0, 0.0, 4000.0), Attitude::new(roll, pitch, yaw), 300.0);
        let n = step_aircraft(&s, Controls::new(r, e, a), 0.1, &TurnRates::default()).unwrap();
        prop_assert!(n.attitude.is_normalized());
        prop_assert!(((n.position - s.position).norm() - 30.0).abs() < 1e-9);
        prop_assert_eq!(n.speed, s.speed);
    }

    #[test]
    fn spawn_respects_geometry(seed in any::<u64>(), mode_ix in 0usize..3) {
        let cfg = SimConfig::default();
        let mode = [OpponentMode::straight(), OpponentMode::serpentine(), OpponentMode::circling()][mode_ix];
        let (ours, opp) = spawn_engagement(&mode, &cfg, seed).unwrap();
        let d = ours.position - opp.position;
        let back = -opp.attitude.forward();
        let angle = (d.dot(back) / d.norm()).acos().to_degrees();
        prop_assert!(angle <= cfg.spawn_cone_deg + 1e-9);
        prop_assert!(ours.position.z >= cfg.altitude_band.0 && ours.position.z <= cfg.altitude_band.1);
        let to_opp = opp.position - ours.position;
        let bearing = to_opp.y.atan2(to_opp.x);
        let off = pursuit_rl::flightsim::wrap_angle(ours.attitude.yaw - bearing).abs();
        prop_assert!(off <= cfg.heading_jitter_deg.to_radians() + 1e-9);
        prop_assert_eq!(ours.speed, cfg.our_speed);
    }

    #[test]
    fn lock_boundaries_are_strict(hold in 0u32..100, dq in 0.0f64..1e-3) {
        prop_assert_eq!(update_lock(100.0, 0.0, hold, 0.1), (false, 0));
        prop_assert_eq!(update_lock(3000.0, 0.0, hold, 0.1), (false, 0));
        prop_assert_eq!(update_lock(1000.0, 15.0 + dq, hold, 0.1), (false, 0));
        let (_, h) = update_lock(100.0 + 1e-9, 15.0 - 1e-9 - dq, hold, 0.1);
        prop_assert_eq!(h, hold + 1);
        let (_, h) = update_lock(3000.0 - 1e-9, 0.0, hold, 0.1);
        prop_assert_eq!(h, hold + 1);
    }

    #[test]
    fn lock_needs_exactly_fifty_consecutive_steps(reset_at in 1u32..49) {
        let mut hold = 0;
        for k in 1..=reset_at {
            let (locked, h) = update_lock(1500.0, 5.0, hold, 0.1);
            prop_assert!(!locked, "locked early at {}", k);
            hold = h;
        }
        let (_, h) = update_lock(1500.0, 20.0, hold, 0.1);
        prop_assert_eq!(h, 0);
        hold = h;
        for k in 1..=50 {
            let (locked, h) = update_lock(1500.0, 5.0, hold, 0.1);
            prop_assert_eq!(locked, k == 50);
            hold = h;
        }
    }

    #[test]
    fn reward_terms_match_closed_forms(
        dist in 0.0f64..20000.0, q in 0.0f64..180.0, z in -100.0f64..9000.0,
        fired in any::<bool>(), hit in any::<bool>(),
    ) {
        let t = compute_reward(StepEvents { fired, hit }, dist, q, z, LockRewardUnits::Radians);
        prop_assert_eq!(t.distance, -1e-4 * dist);
        prop_assert_eq!(t.lock, -10.0 * q.to_radians());
        prop_assert_eq!(t.success, if hit { 800.0 } else { 0.0 });
        prop_assert_eq!(t.altitude, if !(2000.0..=7000.0).contains(&z) { -4.0 } else { 0.0 });
        prop_assert_eq!(t.launch, if fired { -6.0 } else { 0.0 });
        prop_assert_eq!(t.total(), t.distance + t.lock + t.success + t.altitude + t.launch);
    }
}

#[test]
fn altitude_thresholds_are_strict() {
    let e = StepEvents::default();
    let u = LockRewardUnits::Radians;
    assert_eq!(compute_reward(e, 0.0, 0.0, 2000.0, u).altitude, 0.0);
    assert_eq!(compute_reward(e, 0.0, 0.0, 7000.0, u).altitude, 0.0);
    assert_eq!(compute_reward(e, 0.0, 0.0, 1999.999, u).altitude, -4.0);
    assert_eq!(compute_reward(e, 0.0, 0.0, 7000.001, u).altitude, -4.0);
    assert_eq!(compute_reward(e, 0.0, 1.0, 3000.0, LockRewardUnits::Degrees).lock, -10.0);
}

#[test]
fn ram_kill_is_not_a_missile_hit() {
    let sim = SimConfig::default();
    let cfg = EnvConfig::default();
    let mut env = Engagement::new(sim.clone(), cfg.clone(), OpponentMode::Straight, 0).unwrap();
    let mut st = env.state().clone();
    // Closing at 60 m/s from 25 m ends 19 m apart, inside the 20 m radius.
    st.ours.position = st.opponent.position - Vec3::new(25.0, 0.0, 0.0);
    st.ours.attitude = Attitude::new(0.0, 0.0, 0.0);
    let hold = Action::from_raw(&[0.0, 0.0, 0.0, -1.0]);
    let (next, res) = env_step(&st, &hold, &sim, &cfg).unwrap();
    assert_eq!(res.outcome, Some(Outcome::RamKill));
    assert_eq!(res.reward_terms.success, 0.0);
    assert!(next.done && !next.opponent.alive);
    assert!(env_step(&next, &hold, &sim, &cfg).is_err());
    assert!(env.step(&hold).is_ok());
}

#[test]
fn missile_hit_outranks_crash() {
    let sim = SimConfig::default();
    let cfg = EnvConfig::default();
    let env = Engagement::new(sim.clone(), cfg.clone(), OpponentMode::Straight, 0).unwrap();
    let mut st = env.state().clone();
    st.ours.position = Vec3::new(0.0, 0.0, 1.0);
    st.ours.attitude = Attitude::new(0.0, -1.0, 0.0);
    st.missile = pursuit_rl::flightsim::launch_missile(&st.ours, &MissileState::ready(), true, &sim);
    st.missile.position = st.opponent.position - Vec3::new(40.0, 0.0, 0.0);
    st.missile.velocity = Vec3::new(600.0, 0.0, 0.0);
    let (_, res) = env_step(&st, &Action::from_raw(&[0.0; 4]), &sim, &cfg).unwrap();
    assert!(res.hit);
    assert_eq!(res.outcome, Some(Outcome::MissileHit));
    assert_eq!(res.reward_terms.success, 800.0);
    assert_eq!(res.reward_terms.altitude, -4.0);

    st.missile = MissileState::ready();
    let (_, res) = env_step(&st, &Action::from_raw(&[0.0; 4]), &sim, &cfg).unwrap();
    assert_eq!(res.outcome, Some(Outcome::OurCrash));
}

#[test]
fn timeout_at_horizon() {
    let sim = SimConfig::default();
    let cfg = EnvConfig::default().with_horizon(10);
    let mut env = Engagement::new(sim, cfg, OpponentMode::Straight, 1).unwrap();
    for k in 1..=10 {
        let r = env.step(&Action::from_raw(&[0.0, 0.0, 0.0, -1.0])).unwrap();
        assert_eq!(r.done, k == 10);
    }
    assert_eq!(env.state().outcome, Some(Outcome::Timeout));
}

#[test]
fn single_missile_budget_in_training_config() {
    let sim = SimConfig::default();
    let cfg = EnvConfig::default();
    let mut env = Engagement::new(sim, cfg, OpponentMode::Straight, 5).unwrap();
    let fire = Action::from_raw(&[0.0, 0.0, 0.0, 1.0]);
    let mut launches = 0;
    for _ in 0..300 {
        let r = env.step(&fire).unwrap();
        launches += r.launched as u32;
        if r.done {
            break;
        }
    }
    assert_eq!(launches, 1);
    assert_eq!(env.state().launches, 1);
    assert_eq!(env.observation().missile_status, 0.0);
}

#[test]
fn unlimited_missiles_allow_relaunch_after_expiry() {
    let sim = SimConfig::default();
    let cfg = EnvConfig {
        unlimited_missiles: true,
        ..EnvConfig::default()
    };
    let env = Engagement::new(sim.clone(), cfg.clone(), OpponentMode::Straight, 5).unwrap();
    // Point away from the opponent so every missile misses, and keep firing.
    let mut st = env.state().clone();
    st.ours.attitude = Attitude::new(0.0, 0.0, std::f64::consts::PI);
    let fire = Action::from_raw(&[0.0, 0.0, 0.0, 1.0]);
    for _ in 0..700 {
        let was_active = st.missile.active;
        let (next, r) = env_step(&st, &fire, &sim, &cfg).unwrap();
        assert_eq!(r.launched, !was_active);
        assert!(!r.hit && !r.done);
        st = next;
    }
    let per_missile = (sim.missile_lifetime / sim.dt).round() as u32;
    assert!(st.launches >= 700 / (per_missile + 1), "launches {}", st.launches);
    assert!(st.launches <= 700 / per_missile + 1);
}

#[test]
fn fuzzed_env_steps_decompose_reward() {
    use rand::{Rng, SeedableRng};
    let sim = SimConfig::default();
    let cfg = EnvConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut env = Engagement::new(sim.clone(), cfg.clone(), OpponentMode::Straight, 0).unwrap();
    let mut episode = 0u64;
    let mut checked = 0;
    while checked < 2000 {
        let raw = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let r = env.step(&Action::from_raw(&raw)).unwrap();
        assert_eq!(r.reward, r.reward_terms.total());
        checked += 1;
        if r.done {
            episode += 1;
            let mode = [OpponentMode::straight(), OpponentMode::serpentine(), OpponentMode::circling()]
                [(episode % 3) as usize];
            env.reset(mode, episode).unwrap();
        }
    }
}
