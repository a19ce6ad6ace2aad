//! Drives the engagement environment by hand: a naive pure-pursuit pilot
//! steers at the opponent and fires once the lock is held.
//!
//! cargo run --release --example simulate_engagement [straight|serpentine|circling] [seed]

use pursuit_rl::env::{Action, Engagement, EnvConfig};
use pursuit_rl::flightsim::{wrap_angle, OpponentMode, SimConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let mode = OpponentMode::from_name(&args.next().unwrap_or_else(|| "straight".into())).unwrap();
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0);
    let mut env = Engagement::new(SimConfig::default(), EnvConfig::default(), mode, seed).unwrap();
    let mut ret = 0.0;
    loop {
        let obs = env.observation();
        let [dx, dy, dz] = obs.delta_position;
        let [roll, pitch, yaw] = obs.our_euler;
        let heading_err = wrap_angle(dy.atan2(dx) - yaw);
        let pitch_err = dz.atan2(dx.hypot(dy)) - pitch;
        let fire = obs.is_locked() && obs.missile_available();
        let action = Action::from_raw(&[
            (2.0 * heading_err).clamp(-1.0, 1.0),
            (2.0 * pitch_err).clamp(-1.0, 1.0),
            (-1.5 * roll).clamp(-1.0, 1.0),
            if fire { 1.0 } else { -1.0 },
        ]);
        let r = env.step(&action).unwrap();
        ret += r.reward;
        let s = env.state();
        if s.step % 100 == 0 || r.launched || r.done {
            println!(
                "t={:>5.1}s  dist {:>6.0} m  q {:>5.1} deg  lock hold {:>2}  locked {}  missile {}{}",
                s.step as f64 * env.sim.dt,
                s.distance(),
                s.locking_angle(),
                s.lock_hold,
                s.locked,
                if s.missile.active { "in flight" } else if s.missile.expended { "spent" } else { "ready" },
                if r.launched { "  <- launch" } else { "" }
            );
        }
        if r.done {
            println!("outcome {:?} after {} steps, return {ret:.1}", r.outcome.unwrap(), s.step);
            break;
        }
    }
}
