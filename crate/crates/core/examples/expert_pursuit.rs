//! Evaluates the PID autopilot on every opponent mode, then records an expert
//! dataset and checks that it replays exactly.
//!
//! cargo run --release --example expert_pursuit [episodes] [out.jsonl]

use pursuit_rl::env::EnvConfig;
use pursuit_rl::eval::evaluate;
use pursuit_rl::expert::{generate_dataset, replay_episode, ExpertDataset, ExpertPilot, GenerateConfig};
use pursuit_rl::flightsim::{OpponentMode, SimConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(100);
    let out = args.next().unwrap_or_else(|| "expert_serpentine.jsonl".into());
    let sim = SimConfig::default();
    let env = EnvConfig::default();
    let pilot = ExpertPilot::new(Default::default(), sim.dt);
    let seeds: Vec<u64> = (0..n).collect();
    for mode in [OpponentMode::straight(), OpponentMode::serpentine(), OpponentMode::circling()] {
        let r = evaluate(&pilot, &sim, &env, mode, &seeds).unwrap();
        println!(
            "{:<10} success {:.3}  ram {:.3}  timeout {:.3}  mean length {:.0}",
            mode.name(),
            r.success_rate,
            r.ram_rate,
            r.timeout_rate,
            r.mean_length
        );
    }

    let mode = OpponentMode::serpentine();
    let (ds, summary) = generate_dataset(mode, &GenerateConfig::default(), 0, &sim, &env).unwrap();
    ds.save(out.as_ref()).unwrap();
    println!("kept {} of {} episodes, {} pairs -> {out}", summary.kept, summary.attempted, summary.total_pairs);
    let back = ExpertDataset::load(out.as_ref()).unwrap();
    let exact = back.episodes.iter().all(|ep| replay_episode(ep, mode, &sim, &env).unwrap() == ep.states);
    println!("reloaded dataset equal: {}, open-loop replay exact: {exact}", back == ds);
}
