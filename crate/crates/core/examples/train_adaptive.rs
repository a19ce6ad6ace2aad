//! End-to-end desk-scale run: expert data, BC-pretrained expert network, then
//! imitative twin-critic training with the adaptive blend weight.
//!
//! cargo run --release --example train_adaptive [straight|serpentine|circling] [episodes] [seed]

use std::time::Instant;

use pursuit_rl::config::RunConfig;
use pursuit_rl::expert::{generate_dataset, pretrain_bc};
use pursuit_rl::flightsim::OpponentMode;
use pursuit_rl::rl::{ExpertPool, LambdaMode, Trainer};

fn main() {
    let mut args = std::env::args().skip(1);
    let mode = OpponentMode::from_name(&args.next().unwrap_or_else(|| "straight".into())).unwrap();
    let mut cfg = RunConfig::desk();
    if let Some(n) = args.next() {
        cfg.train.max_episodes = n.parse().unwrap();
    }
    let seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(0);
    cfg.train.scheduler = LambdaMode::Adaptive;

    let t0 = Instant::now();
    let (ds, _) = generate_dataset(mode, &cfg.expert, seed, &cfg.sim, &cfg.env).unwrap();
    let (expert, bc) = pretrain_bc(&ds, &cfg.bc).unwrap();
    println!("{} expert pairs, BC held-out error {:.2e} ({:.0}s)", ds.total_pairs(), bc.holdout_loss, t0.elapsed().as_secs_f64());

    let pool = ExpertPool::from_dataset(&ds).unwrap();
    let mut trainer = Trainer::new(cfg.train.clone(), seed, Some(pool), Some(expert)).unwrap();
    trainer
        .train(&cfg.sim, &cfg.env, mode, cfg.train.max_episodes, |_, rec| {
            if let Some(rate) = rec.eval_success_rate {
                println!(
                    "episode {:>4}  return {:>8.1}  lambda {:.3}  eval success {rate:.2}  ({:.0}s)",
                    rec.episode + 1,
                    rec.episode_return,
                    rec.lambda_mean.unwrap_or(f64::NAN),
                    t0.elapsed().as_secs_f64()
                );
            }
            Ok(())
        })
        .unwrap();
    let last = trainer.log.last_eval().unwrap();
    println!("final success {:.2}, best {:.2}", last.success_rate, trainer.best.as_ref().unwrap().0);
}
