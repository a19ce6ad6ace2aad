//! Trains the adaptive, linear and zero (plain TD3) blend schedules under the
//! same budget and compares final success rates.
//!
//! cargo run --release --example compare_schedulers [straight|serpentine|circling] [episodes] [seed]

use pursuit_rl::config::RunConfig;
use pursuit_rl::expert::{generate_dataset, pretrain_bc};
use pursuit_rl::flightsim::OpponentMode;
use pursuit_rl::rl::{ExpertPool, LambdaMode, Trainer};

fn main() {
    let mut args = std::env::args().skip(1);
    let mode = OpponentMode::from_name(&args.next().unwrap_or_else(|| "serpentine".into())).unwrap();
    let mut cfg = RunConfig::desk();
    if let Some(n) = args.next() {
        cfg.train.max_episodes = n.parse().unwrap();
    }
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0);
    let (ds, _) = generate_dataset(mode, &cfg.expert, seed, &cfg.sim, &cfg.env).unwrap();
    let (expert, _) = pretrain_bc(&ds, &cfg.bc).unwrap();

    for sched in [LambdaMode::Adaptive, LambdaMode::Linear, LambdaMode::Zero] {
        let mut tc = cfg.train.clone();
        tc.scheduler = sched;
        let pool = sched.needs_expert_data().then(|| ExpertPool::from_dataset(&ds).unwrap());
        let net = (sched == LambdaMode::Adaptive).then(|| expert.clone());
        let mut t = Trainer::new(tc, seed, pool, net).unwrap();
        t.train(&cfg.sim, &cfg.env, mode, cfg.train.max_episodes, |_, _| Ok(())).unwrap();
        let curve: Vec<String> = t
            .log
            .evaluations
            .iter()
            .map(|(e, r)| format!("{e}:{:.2}", r.success_rate))
            .collect();
        let lambda = t.log.lambda_trace.iter().sum::<f64>() / t.log.lambda_trace.len().max(1) as f64;
        println!("{:<8} mean lambda {lambda:.3}  eval curve {}", sched.name(), curve.join(" "));
    }
}
