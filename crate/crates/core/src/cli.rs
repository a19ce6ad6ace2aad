//! Command-line front end. Every command resolves a [`RunConfig`], writes it
//! next to its outputs, and maps failures to exit codes: 1 for configuration
//! errors, 2 for runtime aborts.

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, evaluate_episodes, write_trajectory, EvalReport};
use crate::expert::{generate_dataset, pretrain_bc, BcReport, ExpertDataset, ExpertPilot, GenerateSummary};
use crate::flightsim::OpponentMode;
use crate::nn::{load_network, save_networks, Mlp};
use crate::policy::ActorPolicy;
use crate::rl::{load_snapshot, mix_seed, save_snapshot, ExpertPool, LambdaMode, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const CONFIG_FILE: &str = "config.toml";
pub const DATASET_FILE: &str = "expert.jsonl";
pub const EXPERT_POLICY_FILE: &str = "expert_policy.ckpt";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.bin";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";

#[derive(Debug, Parser)]
#[command(name = "pursuit", version, about = "Pursuit-lock-launch simulator and imitative actor-critic trainer")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML run configuration; missing keys take preset values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base preset used when no config file is given: `desk` or `default`.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// straight | serpentine | circling
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// linear | adaptive | zero | one
    #[arg(long, global = true)]
    pub scheduler: Option<String>,
    #[arg(long, global = true)]
    pub unlimited_missiles: bool,
    /// Episode count: successful expert episodes, training episodes or
    /// evaluation episodes depending on the command.
    #[arg(long, global = true)]
    pub episodes: Option<u64>,
    /// Allow writing into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record successful autopilot episodes as an expert dataset.
    GenExpert,
    /// Pretrain the expert policy network by behavior cloning.
    Bc {
        /// Expert dataset; generated into the output directory if omitted.
        #[arg(long)]
        expert: Option<PathBuf>,
    },
    /// Train an actor with the configured blend-weight scheduler.
    Train {
        #[arg(long)]
        expert: Option<PathBuf>,
        /// Pretrained expert network for the adaptive scheduler.
        #[arg(long)]
        expert_policy: Option<PathBuf>,
        /// Continue from the snapshot in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate a checkpoint (or the autopilot) without exploration noise.
    Eval {
        #[arg(long, required_unless_present = "autopilot")]
        checkpoint: Option<PathBuf>,
        /// Evaluate the scripted autopilot instead of a network.
        #[arg(long)]
        autopilot: bool,
    },
    /// Write per-step trajectories of evaluation episodes.
    ExportTraj {
        #[arg(long, required_unless_present = "autopilot")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        autopilot: bool,
    },
    /// Parse and validate a configuration, then print it fully resolved.
    ValidateConfig,
}

/// Builds the run configuration from preset, file and flag overrides.
pub fn resolve_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::preset(c.preset.as_deref().unwrap_or("desk"))?,
    };
    if let Some(s) = c.seed {
        cfg.seeds = vec![s];
    }
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    if let Some(m) = &c.mode {
        cfg.mode = OpponentMode::from_name(m).map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(s) = &c.scheduler {
        cfg.train.scheduler = LambdaMode::from_name(s)?;
    }
    if c.unlimited_missiles {
        cfg.env.unlimited_missiles = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Creates `dir`, refusing a non-empty one unless `force`.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let nonempty = fs::read_dir(dir)?.next().is_some();
        if nonempty && !force {
            return Err(Error::Config(format!(
                "output directory {} is not empty (use --force)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn cmd_gen_expert(cfg: &RunConfig) -> Result<(ExpertDataset, GenerateSummary)> {
    let (ds, summary) = generate_dataset(cfg.mode, &cfg.expert, cfg.seed(), &cfg.sim, &cfg.env)?;
    ds.save(&cfg.out_dir.join(DATASET_FILE))?;
    write_json(&cfg.out_dir.join("expert_summary.json"), &summary)?;
    Ok((ds, summary))
}

pub fn cmd_bc(cfg: &RunConfig, ds: &ExpertDataset) -> Result<(Mlp, BcReport)> {
    let (net, report) = pretrain_bc(ds, &cfg.bc)?;
    save_networks(&cfg.out_dir.join(EXPERT_POLICY_FILE), &[("actor", &net)])?;
    write_json(&cfg.out_dir.join("bc_report.json"), &report)?;
    Ok((net, report))
}

fn load_or_generate(cfg: &RunConfig, path: Option<&Path>) -> Result<ExpertDataset> {
    match path {
        Some(p) => {
            let ds = ExpertDataset::load(p)?;
            ds.validate()?;
            Ok(ds)
        }
        None => Ok(cmd_gen_expert(cfg)?.0),
    }
}

/// Trains per the configuration, writing the metrics log, snapshots and
/// checkpoints into `cfg.out_dir`. Returns the trainer at the end.
pub fn cmd_train(
    cfg: &RunConfig,
    expert: Option<&Path>,
    expert_policy: Option<&Path>,
    resume: bool,
) -> Result<Trainer> {
    let out = &cfg.out_dir;
    let saved_dataset = out.join(DATASET_FILE);
    let expert = expert.or_else(|| (resume && saved_dataset.exists()).then_some(saved_dataset.as_path()));
    let needs_data = cfg.train.scheduler.needs_expert_data();
    let dataset = if needs_data {
        Some(load_or_generate(cfg, expert)?)
    } else {
        None
    };
    let expert_net = match (cfg.train.scheduler, expert_policy, &dataset) {
        (LambdaMode::Adaptive, Some(p), _) => Some(load_network(p, "actor")?),
        (LambdaMode::Adaptive, None, Some(ds)) => {
            let existing = out.join(EXPERT_POLICY_FILE);
            if resume && existing.exists() {
                Some(load_network(&existing, "actor")?)
            } else {
                Some(cmd_bc(cfg, ds)?.0)
            }
        }
        _ => None,
    };
    let pool = dataset.as_ref().map(ExpertPool::from_dataset).transpose()?;
    let mut trainer = Trainer::new(cfg.train.clone(), cfg.seed(), pool, expert_net)?;
    let snapshot = out.join(SNAPSHOT_FILE);
    if resume {
        load_snapshot(&snapshot, &mut trainer)?;
    }
    // The on-disk log always mirrors the trainer's own, so a resumed run's
    // file is identical to an uninterrupted one.
    fs::write(out.join(METRICS_FILE), trainer.log.metrics_jsonl())?;

    let episodes = cfg.train.max_episodes;
    let every = cfg.train.checkpoint_every;
    trainer.train(&cfg.sim, &cfg.env, cfg.mode, episodes, |t, rec| {
        use std::io::Write;
        let mut f = fs::OpenOptions::new().append(true).open(out.join(METRICS_FILE))?;
        writeln!(f, "{}", serde_json::to_string(rec)?)?;
        if t.episode % every == 0 || t.episode == episodes {
            save_snapshot(&snapshot, t)?;
            save_networks(&out.join(BEST_CHECKPOINT), &[("actor", t.best_actor())])?;
        }
        Ok(())
    })?;
    save_networks(
        &out.join(FINAL_CHECKPOINT),
        &[
            ("actor", &trainer.nets.actor),
            ("critic1", &trainer.nets.critic1),
            ("critic2", &trainer.nets.critic2),
        ],
    )?;
    save_networks(&out.join(BEST_CHECKPOINT), &[("actor", trainer.best_actor())])?;
    if let Some(r) = trainer.log.last_eval() {
        write_json(&out.join("final_eval.json"), r)?;
    }
    Ok(trainer)
}

pub fn eval_seeds(cfg: &RunConfig, n: usize) -> Vec<u64> {
    // Distinct from the training-time evaluation seeds.
    (0..n as u64).map(|i| mix_seed(cfg.seed(), 99, i)).collect()
}

fn load_actor(path: &Path, cfg: &RunConfig) -> Result<ActorPolicy> {
    let net = load_network(path, "actor")?;
    let want = crate::rl::actor_architecture(&cfg.train.hidden);
    if net.arch() != &want {
        return Err(Error::Config(format!(
            "checkpoint {} holds a {:?} network, configuration expects {:?}",
            path.display(),
            net.arch(),
            want
        )));
    }
    ActorPolicy::new(net)
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>, episodes: usize) -> Result<EvalReport> {
    let seeds = eval_seeds(cfg, episodes);
    match checkpoint {
        Some(p) => evaluate(&load_actor(p, cfg)?, &cfg.sim, &cfg.env, cfg.mode, &seeds),
        None => {
            let pilot = ExpertPilot::new(cfg.expert.gains, cfg.sim.dt);
            evaluate(&pilot, &cfg.sim, &cfg.env, cfg.mode, &seeds)
        }
    }
}

/// Writes `traj_<i>.jsonl` per episode; returns the file paths.
pub fn cmd_export_traj(cfg: &RunConfig, checkpoint: Option<&Path>, episodes: usize) -> Result<Vec<PathBuf>> {
    let seeds = eval_seeds(cfg, episodes);
    let eps = match checkpoint {
        Some(p) => evaluate_episodes(&load_actor(p, cfg)?, &cfg.sim, &cfg.env, cfg.mode, &seeds, true)?,
        None => {
            let pilot = ExpertPilot::new(cfg.expert.gains, cfg.sim.dt);
            evaluate_episodes(&pilot, &cfg.sim, &cfg.env, cfg.mode, &seeds, true)?
        }
    };
    let mut paths = Vec::new();
    for (i, e) in eps.iter().enumerate() {
        let path = cfg.out_dir.join(format!("traj_{i:03}.jsonl"));
        let f = fs::File::create(&path)?;
        write_trajectory(BufWriter::new(f), e.trajectory.as_deref().unwrap_or(&[]))?;
        paths.push(path);
    }
    Ok(paths)
}

fn execute(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let mut cfg = resolve_config(c)?;
    match &cli.command {
        Command::ValidateConfig => {
            print!("{}", cfg.to_toml_string()?);
            return Ok(());
        }
        Command::GenExpert => {
            if let Some(n) = c.episodes {
                cfg.expert.n_success = n as usize;
            }
            cfg.validate()?;
            prepare_out_dir(&cfg.out_dir, c.force)?;
            cfg.save(&cfg.out_dir.join(CONFIG_FILE))?;
            let (_, s) = cmd_gen_expert(&cfg)?;
            println!(
                "wrote {} episodes, {} pairs ({} attempted) to {}",
                s.kept,
                s.total_pairs,
                s.attempted,
                cfg.out_dir.join(DATASET_FILE).display()
            );
        }
        Command::Bc { expert } => {
            prepare_out_dir(&cfg.out_dir, c.force)?;
            cfg.save(&cfg.out_dir.join(CONFIG_FILE))?;
            let ds = load_or_generate(&cfg, expert.as_deref())?;
            let (_, r) = cmd_bc(&cfg, &ds)?;
            println!(
                "held-out action error {:.3e} after {} iterations",
                r.holdout_loss, r.iterations
            );
        }
        Command::Train {
            expert,
            expert_policy,
            resume,
        } => {
            if let Some(n) = c.episodes {
                cfg.train.max_episodes = n;
            }
            cfg.validate()?;
            if *resume {
                // Only the episode budget may change on resume.
                let mut saved = RunConfig::load(&cfg.out_dir.join(CONFIG_FILE))?;
                saved.train.max_episodes = cfg.train.max_episodes;
                if saved.train != cfg.train
                    || saved.sim != cfg.sim
                    || saved.env != cfg.env
                    || saved.mode != cfg.mode
                    || saved.seed() != cfg.seed()
                {
                    return Err(Error::Config(
                        "resumed configuration differs from the saved one".into(),
                    ));
                }
            } else {
                prepare_out_dir(&cfg.out_dir, c.force)?;
            }
            cfg.save(&cfg.out_dir.join(CONFIG_FILE))?;
            let t = cmd_train(&cfg, expert.as_deref(), expert_policy.as_deref(), *resume)?;
            match t.log.last_eval() {
                Some(r) => println!(
                    "trained {} episodes; last evaluation success {:.3}",
                    t.episode, r.success_rate
                ),
                None => println!("trained {} episodes", t.episode),
            }
        }
        Command::Eval {
            checkpoint,
            autopilot,
        } => {
            let n = c.episodes.unwrap_or(cfg.train.eval_episodes as u64) as usize;
            let ckpt = if *autopilot { None } else { checkpoint.as_deref() };
            let report = cmd_eval(&cfg, ckpt, n)?;
            let text = serde_json::to_string_pretty(&report)?;
            println!("{text}");
            if c.out.is_some() {
                fs::create_dir_all(&cfg.out_dir)?;
                write_json(&cfg.out_dir.join("eval.json"), &report)?;
            }
        }
        Command::ExportTraj {
            checkpoint,
            autopilot,
        } => {
            prepare_out_dir(&cfg.out_dir, c.force)?;
            cfg.save(&cfg.out_dir.join(CONFIG_FILE))?;
            let n = c.episodes.unwrap_or(1) as usize;
            let ckpt = if *autopilot { None } else { checkpoint.as_deref() };
            let paths = cmd_export_traj(&cfg, ckpt, n)?;
            println!("wrote {} trajectories to {}", paths.len(), cfg.out_dir.display());
        }
    }
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
