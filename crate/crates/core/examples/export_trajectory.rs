//! Flies recorded episodes and writes per-step JSONL trajectories suitable for
//! plotting (positions, attitude, distance, locking angle, lock and launches).
//!
//! cargo run --release --example export_trajectory [mode] [episodes] [out_dir]

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use pursuit_rl::config::RunConfig;
use pursuit_rl::eval::{evaluate_episodes, write_trajectory};
use pursuit_rl::expert::ExpertPilot;
use pursuit_rl::flightsim::OpponentMode;

fn main() {
    let mut args = std::env::args().skip(1);
    let mode = OpponentMode::from_name(&args.next().unwrap_or_else(|| "circling".into())).unwrap();
    let n: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(3);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "trajectories".into()));
    let cfg = RunConfig::desk();
    fs::create_dir_all(&out).unwrap();
    let pilot = ExpertPilot::new(cfg.expert.gains, cfg.sim.dt);
    let seeds: Vec<u64> = (0..n).collect();
    let eps = evaluate_episodes(&pilot, &cfg.sim, &cfg.env, mode, &seeds, true).unwrap();
    for (i, e) in eps.iter().enumerate() {
        let path = out.join(format!("traj_{i:03}.jsonl"));
        let traj = e.trajectory.as_deref().unwrap();
        write_trajectory(BufWriter::new(File::create(&path).unwrap()), traj).unwrap();
        let lock_at = traj.iter().position(|r| r.locked).map(|t| t + 1);
        let launch_at = traj.iter().position(|r| r.launch_event).map(|t| t + 1);
        println!(
            "{}: {:?} in {} steps, first lock at {:?}, launch at {:?}",
            path.display(),
            e.outcome,
            e.length,
            lock_at,
            launch_at
        );
    }
}
