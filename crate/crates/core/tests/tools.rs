use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use pursuit_rl::cli::{EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME};
use pursuit_rl::config::RunConfig;
use pursuit_rl::env::{Engagement, EnvConfig, Observation, Outcome};
use pursuit_rl::expert::{
    action_mse, generate_dataset, pretrain_bc, record_episode, replay_episode, BcConfig, ExpertDataset,
    ExpertGains, ExpertPilot, GenerateConfig, PidController, PidGains, PID_OUTPUT_LIMIT,
};
use pursuit_rl::flightsim::{OpponentMode, SimConfig};
use pursuit_rl::policy::Policy;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pursuit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn small_config(dir: &Path) -> String {
    let mut cfg = RunConfig::desk();
    cfg.train.hidden = vec![16, 16];
    cfg.bc.hidden = vec![16, 16];
    cfg.bc.iterations = 300;
    cfg.bc.eval_every = 100;
    cfg.train.batch_size = 32;
    cfg.train.expert_batch_size = 32;
    cfg.train.eval_every = 2;
    cfg.train.eval_episodes = 4;
    cfg.train.checkpoint_every = 2;
    cfg.env = cfg.env.with_horizon(300);
    cfg.expert.n_success = 3;
    cfg.expert.probe_episodes = 4;
    let path = dir.join("small.toml");
    cfg.save(&path).unwrap();
    path.display().to_string()
}

// ---------------------------------------------------------------------------
// Expert pilot and dataset
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pid_output_is_bounded(
        kp in 0.0f64..20.0, ki in 0.0f64..5.0, kd in 0.0f64..5.0,
        errs in proptest::collection::vec(-1e3f64..1e3, 1..50),
    ) {
        let mut pid = PidController::new(PidGains { kp, ki, kd, integral_limit: 2.0 });
        for e in errs {
            let u = pid.update(e, 0.1);
            prop_assert!(u.abs() <= PID_OUTPUT_LIMIT);
            prop_assert!(pid.integral().abs() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn expert_fires_only_when_locked_with_a_missile(
        dx in -5000.0f64..5000.0, dy in -5000.0f64..5000.0, dz in -1000.0f64..1000.0,
        roll in -3.0f64..3.0, pitch in -1.0f64..1.0, yaw in -3.0f64..3.0,
        locked in any::<bool>(), missile in any::<bool>(),
    ) {
        let obs = Observation {
            delta_position: [dx, dy, dz],
            our_euler: [roll, pitch, yaw],
            locking_angle: 10.0,
            locking_status: if locked { 1.0 } else { 0.0 },
            missile_status: if missile { 1.0 } else { 0.0 },
            opp_euler: [0.0; 3],
            opp_health: 1.0,
        };
        let mut pilot = ExpertPilot::new(ExpertGains::default(), 0.1);
        let a = pilot.act(&obs);
        prop_assert_eq!(a.wants_launch(), locked && missile);
        for v in [a.rudder, a.elevator, a.aileron] {
            prop_assert!(v.abs() < 1.0);
        }
    }
}

#[test]
fn expert_episodes_launch_only_under_lock() {
    let sim = SimConfig::default();
    let env_cfg = EnvConfig::default();
    for (k, mode) in [OpponentMode::straight(), OpponentMode::serpentine(), OpponentMode::circling()]
        .into_iter()
        .enumerate()
    {
        let mut env = Engagement::new(sim.clone(), env_cfg.clone(), mode, 100 + k as u64).unwrap();
        let mut pilot = ExpertPilot::new(ExpertGains::default(), sim.dt);
        loop {
            let locked = env.state().locked;
            let a = pilot.act(&env.observation());
            let r = env.step(&a).unwrap();
            if r.launched {
                assert!(locked, "launch without lock on {}", mode.name());
            }
            if r.done {
                assert_eq!(r.outcome, Some(Outcome::MissileHit), "{}", mode.name());
                break;
            }
        }
    }
}

#[test]
fn dataset_round_trips_and_replays() {
    let sim = SimConfig::default();
    let env_cfg = EnvConfig::default();
    let cfg = GenerateConfig {
        n_success: 3,
        probe_episodes: 4,
        ..GenerateConfig::default()
    };
    let mode = OpponentMode::serpentine();
    let (ds, summary) = generate_dataset(mode, &cfg, 5, &sim, &env_cfg).unwrap();
    assert_eq!(ds.episodes.len(), 3);
    assert_eq!(summary.kept, 3);
    assert_eq!(summary.total_pairs, ds.total_pairs());
    assert!(ds.episodes.iter().all(|e| e.success && e.states.len() == e.actions.len()));
    ds.validate().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expert.jsonl");
    ds.save(&path).unwrap();
    let back = ExpertDataset::load(&path).unwrap();
    assert_eq!(back, ds);
    let again = generate_dataset(mode, &cfg, 5, &sim, &env_cfg).unwrap().0;
    assert_eq!(again, ds);

    for ep in &ds.episodes {
        let replayed = replay_episode(ep, mode, &sim, &env_cfg).unwrap();
        assert_eq!(replayed, ep.states);
        let (outcome, states, actions) = record_episode(ExpertGains::default(), &sim, &env_cfg, mode, ep.seed).unwrap();
        assert_eq!(outcome, Outcome::MissileHit);
        assert_eq!(states, ep.states);
        assert_eq!(actions, ep.actions);
    }

    let text = fs::read_to_string(&path).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["record"], "header");
    assert_eq!(first["total_pairs"], ds.total_pairs() as u64);
    assert_eq!(text.lines().count(), 1 + ds.total_pairs());
    let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
    fs::write(&path, truncated).unwrap();
    assert!(ExpertDataset::load(&path).unwrap_err().is_config());
}

#[test]
fn behavior_cloning_fits_the_expert() {
    let sim = SimConfig::default();
    let env_cfg = EnvConfig::default();
    let gen = GenerateConfig {
        n_success: 4,
        probe_episodes: 4,
        ..GenerateConfig::default()
    };
    let (ds, _) = generate_dataset(OpponentMode::Straight, &gen, 0, &sim, &env_cfg).unwrap();
    let cfg = BcConfig {
        hidden: vec![32, 32],
        iterations: 3000,
        eval_every: 500,
        ..BcConfig::default()
    };
    let (net, report) = pretrain_bc(&ds, &cfg).unwrap();
    assert_eq!(net.arch().input, 13);
    assert_eq!(net.arch().output, 4);
    let (states, actions) = ds.scaled_matrices();
    let untrained = pursuit_rl::nn::Mlp::new(
        pursuit_rl::rl::actor_architecture(&cfg.hidden),
        &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
    );
    let baseline = action_mse(&untrained, &states, &actions).unwrap();
    assert!(report.holdout_loss < 0.2 * baseline, "{baseline} {report:?}");
    assert!(action_mse(&net, &states, &actions).unwrap() < 0.1 * baseline);
    assert_eq!(report.train_pairs + report.holdout_pairs, ds.total_pairs());
    let same = pretrain_bc(&ds, &cfg).unwrap().0;
    assert_eq!(same, net);
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[test]
fn exit_codes() {
    assert_eq!(code(&bin(&["--help"])), EXIT_OK);
    assert_eq!(code(&bin(&["no-such-command"])), EXIT_CONFIG);
    assert_eq!(code(&bin(&["validate-config"])), EXIT_OK);
    assert_eq!(code(&bin(&["validate-config", "--preset", "nope"])), EXIT_CONFIG);
    assert_eq!(code(&bin(&["validate-config", "--mode", "loop"])), EXIT_CONFIG);
    assert_eq!(code(&bin(&["validate-config", "--scheduler", "cosine"])), EXIT_CONFIG);
    assert_eq!(code(&bin(&["eval"])), EXIT_CONFIG, "checkpoint or autopilot required");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[train]\ntau = 0.0\n").unwrap();
    assert_eq!(code(&bin(&["validate-config", "--config", bad.to_str().unwrap()])), EXIT_CONFIG);
    fs::write(&bad, "[train\n").unwrap();
    assert_eq!(code(&bin(&["validate-config", "--config", bad.to_str().unwrap()])), EXIT_CONFIG);
    let missing = dir.path().join("missing.ckpt");
    let o = bin(&["eval", "--checkpoint", missing.to_str().unwrap(), "--episodes", "1"]);
    assert_eq!(code(&o), EXIT_RUNTIME);
}

#[test]
fn validate_config_prints_resolved_toml() {
    let o = bin(&["validate-config", "--seed", "9", "--mode", "circling", "--scheduler", "linear"]);
    assert_eq!(code(&o), EXIT_OK);
    let cfg = RunConfig::from_toml_str(&String::from_utf8(o.stdout).unwrap(), "stdout").unwrap();
    assert_eq!(cfg.seeds, vec![9]);
    assert_eq!(cfg.mode, OpponentMode::circling());
    assert_eq!(cfg.train.scheduler, pursuit_rl::rl::LambdaMode::Linear);
    assert_eq!(cfg.train.hidden, RunConfig::desk().train.hidden);
}

#[test]
fn gen_expert_is_reproducible_and_guards_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = bin(&["gen-expert", "--episodes", "5", "--seed", "3", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let da = fs::read(a.join("expert.jsonl")).unwrap();
    let db = fs::read(b.join("expert.jsonl")).unwrap();
    assert_eq!(da, db, "regeneration is byte-identical");
    let ds = ExpertDataset::load(&a.join("expert.jsonl")).unwrap();
    assert_eq!(ds.episodes.len(), 5);
    assert!(a.join("config.toml").exists());

    let o = bin(&["gen-expert", "--episodes", "5", "--seed", "3", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_CONFIG, "non-empty output directory is refused");
    let o = bin(&["gen-expert", "--episodes", "2", "--seed", "3", "--out", a.to_str().unwrap(), "--force"]);
    assert_eq!(code(&o), EXIT_OK);
    assert_eq!(ExpertDataset::load(&a.join("expert.jsonl")).unwrap().episodes.len(), 2);
}

#[test]
fn eval_autopilot_reports_success() {
    let o = bin(&["eval", "--autopilot", "--episodes", "12"]);
    assert_eq!(code(&o), EXIT_OK);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["episodes"], 12);
    assert!(v["success_rate"].as_f64().unwrap() >= 0.9);
    let o = bin(&["eval", "--autopilot", "--episodes", "6", "--unlimited-missiles"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["launch_efficiency"].as_f64().is_some());
}

#[test]
fn export_traj_records_every_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj");
    let o = bin(&["export-traj", "--autopilot", "--episodes", "2", "--mode", "serpentine", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = RunConfig::load(&out.join("config.toml")).unwrap();
    let seeds = pursuit_rl::cli::eval_seeds(&cfg, 2);
    for (i, seed) in seeds.into_iter().enumerate() {
        let text = fs::read_to_string(out.join(format!("traj_{i:03}.jsonl"))).unwrap();
        let mut pilot = ExpertPilot::new(cfg.expert.gains, cfg.sim.dt);
        let ep = pursuit_rl::eval::run_episode(&mut pilot, &cfg.sim, &cfg.env, cfg.mode, seed, false).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len() as u64, ep.length);
        for (k, l) in lines.iter().enumerate() {
            assert_eq!(l["t"], k as u64 + 1);
        }
        let launches = lines.iter().filter(|l| l["launch_event"] == true).count();
        assert_eq!(launches as u32, ep.launches);
    }
}

#[test]
fn train_bc_and_resume_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let o_s = out.to_str().unwrap();

    let o = bin(&["train", "--config", &cfg, "--out", o_s, "--episodes", "2", "--scheduler", "adaptive"]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.toml", "expert.jsonl", "expert_policy.ckpt", "metrics.jsonl", "snapshot.bin", "final.ckpt", "best.ckpt", "final_eval.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let o = bin(&["train", "--config", &cfg, "--out", o_s, "--episodes", "4", "--scheduler", "adaptive", "--resume"]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let resumed = fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    assert_eq!(resumed.lines().count(), 4);

    let straight = dir.path().join("straight");
    let o = bin(&["train", "--config", &cfg, "--out", straight.to_str().unwrap(), "--episodes", "4", "--scheduler", "adaptive"]);
    assert_eq!(code(&o), EXIT_OK);
    let full = fs::read_to_string(straight.join("metrics.jsonl")).unwrap();
    assert_eq!(resumed, full, "resumed metrics match an uninterrupted run");

    let o = bin(&["train", "--config", &cfg, "--out", o_s, "--episodes", "5", "--seed", "1", "--scheduler", "adaptive", "--resume"]);
    assert_eq!(code(&o), EXIT_CONFIG, "resume with a different seed is refused");

    let ckpt = out.join("final.ckpt");
    let o = bin(&["eval", "--config", &cfg, "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "3"]);
    assert_eq!(code(&o), EXIT_OK);
    let o = bin(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--episodes", "3"]);
    assert_eq!(code(&o), EXIT_CONFIG, "desk preset expects wider networks");

    let bc_out = dir.path().join("bc");
    let o = bin(&["bc", "--config", &cfg, "--out", bc_out.to_str().unwrap(), "--expert", out.join("expert.jsonl").to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_OK);
    assert!(bc_out.join("expert_policy.ckpt").exists());
}
