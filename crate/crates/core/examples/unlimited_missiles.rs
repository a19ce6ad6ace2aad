//! Launch efficiency with unlimited missiles: every launch while no missile is
//! in flight fires a fresh one, and efficiency is hits per launch.
//!
//! cargo run --release --example unlimited_missiles [checkpoint.ckpt] [mode]
//!
//! Without a checkpoint the autopilot is evaluated; checkpoints must match the
//! desk actor architecture.

use pursuit_rl::config::RunConfig;
use pursuit_rl::env::EnvConfig;
use pursuit_rl::eval::{evaluate, EvalReport};
use pursuit_rl::expert::ExpertPilot;
use pursuit_rl::flightsim::OpponentMode;
use pursuit_rl::nn::load_network;
use pursuit_rl::policy::ActorPolicy;

fn main() {
    let mut args = std::env::args().skip(1);
    let ckpt = args.next();
    let mode = OpponentMode::from_name(&args.next().unwrap_or_else(|| "serpentine".into())).unwrap();
    let cfg = RunConfig::desk();
    let env = EnvConfig {
        unlimited_missiles: true,
        ..cfg.env.clone()
    };
    let seeds: Vec<u64> = (0..200).collect();
    let report: EvalReport = match &ckpt {
        Some(p) => {
            let policy = ActorPolicy::new(load_network(p.as_ref(), "actor").unwrap()).unwrap();
            evaluate(&policy, &cfg.sim, &env, mode, &seeds).unwrap()
        }
        None => evaluate(&ExpertPilot::new(cfg.expert.gains, cfg.sim.dt), &cfg.sim, &env, mode, &seeds).unwrap(),
    };
    println!(
        "{} on {}: {} hits / {} launches, efficiency {:.3}, success {:.2}",
        ckpt.as_deref().unwrap_or("autopilot"),
        mode.name(),
        report.hits,
        report.launches,
        report.launch_efficiency.unwrap_or(0.0),
        report.success_rate
    );
}
