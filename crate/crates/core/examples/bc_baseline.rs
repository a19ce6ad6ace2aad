//! Behavior cloning on the expert dataset, then a noiseless evaluation of the
//! cloned policy at desk scale.
//!
//! cargo run --release --example bc_baseline [straight|serpentine|circling] [seed]

use pursuit_rl::config::RunConfig;
use pursuit_rl::eval::evaluate;
use pursuit_rl::expert::{generate_dataset, pretrain_bc};
use pursuit_rl::flightsim::OpponentMode;
use pursuit_rl::policy::ActorPolicy;

fn main() {
    let mut args = std::env::args().skip(1);
    let mode = OpponentMode::from_name(&args.next().unwrap_or_else(|| "straight".into())).unwrap();
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0);
    let cfg = RunConfig::desk();
    let (ds, _) = generate_dataset(mode, &cfg.expert, seed, &cfg.sim, &cfg.env).unwrap();
    let (net, report) = pretrain_bc(&ds, &cfg.bc).unwrap();
    for (it, train, hold) in &report.curve {
        println!("iter {it:>6}  train {train:.3e}  held-out {hold:.3e}");
    }
    let seeds: Vec<u64> = (0..100).map(|i| 10_000 + i).collect();
    let r = evaluate(&ActorPolicy::new(net).unwrap(), &cfg.sim, &cfg.env, mode, &seeds).unwrap();
    println!(
        "{} pairs; cloned policy on {}: success {:.2}, mean return {:.1}",
        ds.total_pairs(),
        mode.name(),
        r.success_rate,
        r.mean_return
    );
}
