//! Resumable training state: every network, optimizer moment, the replay
//! buffer and the log. Episode randomness is derived from `(seed, episode)`,
//! so no generator state needs saving.

use std::fs;
use std::path::Path;

use crate::codec::{BinReader, BinWriter};
use crate::env::{ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{read_network, write_network, AdamConfig, AdamState, Architecture, Gradients, Mlp};
use crate::rl::replay::{ReplayBuffer, Transition};
use crate::rl::trainer::{TrainConfig, TrainLog, Trainer};
use crate::rl::update::{Networks, Optimizers};

const SNAPSHOT_MAGIC: &[u8; 8] = b"PRLSNAP\0";
pub const SNAPSHOT_VERSION: u32 = 1;

fn write_adam(w: &mut BinWriter, a: &AdamState) {
    w.f64(a.config.lr);
    w.f64(a.config.beta1);
    w.f64(a.config.beta2);
    w.f64(a.config.eps);
    w.u64(a.step);
    w.f64s(&a.m.flat());
    w.f64s(&a.v.flat());
}

fn gradients_from_flat(r: &BinReader<'_>, arch: &Architecture, flat: &[f64]) -> Result<Gradients> {
    let mut net = Mlp::zeros(arch.clone());
    net.set_params_flat(flat).map_err(|e| r.error(e.to_string()))?;
    Ok(Gradients {
        layers: net.layers().to_vec(),
    })
}

fn read_adam(r: &mut BinReader<'_>, arch: &Architecture) -> Result<AdamState> {
    let config = AdamConfig {
        lr: r.f64()?,
        beta1: r.f64()?,
        beta2: r.f64()?,
        eps: r.f64()?,
    };
    let step = r.u64()?;
    let m = r.f64s()?;
    let v = r.f64s()?;
    Ok(AdamState {
        config,
        step,
        m: gradients_from_flat(r, arch, &m)?,
        v: gradients_from_flat(r, arch, &v)?,
    })
}

pub fn encode_snapshot(t: &Trainer) -> Result<Vec<u8>> {
    let mut w = BinWriter::new();
    w.bytes(SNAPSHOT_MAGIC);
    w.u32(SNAPSHOT_VERSION);
    w.str(&serde_json::to_string(&t.cfg)?);
    w.u64(t.seed);
    w.u64(t.episode);
    w.u64(t.total_steps);
    for net in [
        &t.nets.actor,
        &t.nets.critic1,
        &t.nets.critic2,
        &t.nets.actor_target,
        &t.nets.critic1_target,
        &t.nets.critic2_target,
    ] {
        write_network(&mut w, net);
    }
    for opt in [&t.opts.actor, &t.opts.critic1, &t.opts.critic2] {
        write_adam(&mut w, opt);
    }
    let (data, head) = t.buffer.raw_parts();
    w.u64(t.buffer.capacity() as u64);
    w.u64(head as u64);
    w.u64(t.buffer.inserted());
    w.u64(data.len() as u64);
    for tr in data {
        for &v in tr.s.iter().chain(tr.a.iter()) {
            w.f64(v);
        }
        w.f64(tr.r);
        for &v in &tr.s_next {
            w.f64(v);
        }
        w.u8(tr.done as u8);
    }
    match &t.best {
        Some((rate, net)) => {
            w.u8(1);
            w.f64(*rate);
            write_network(&mut w, net);
        }
        None => w.u8(0),
    }
    w.str(&serde_json::to_string(&t.log)?);
    Ok(w.into_inner())
}

/// Restores `trainer` in place. The trainer must have been built with the
/// same configuration, seed and expert data as the one that was saved.
pub fn decode_snapshot_into(bytes: &[u8], path: &str, trainer: &mut Trainer) -> Result<()> {
    let mut r = BinReader::new(bytes, path);
    r.expect(SNAPSHOT_MAGIC)?;
    let version = r.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(r.error(format!("unsupported snapshot version {version}")));
    }
    let cfg: TrainConfig = serde_json::from_str(&r.str()?).map_err(|e| r.error(e.to_string()))?;
    let seed = r.u64()?;
    // The episode budget may grow between runs; everything else must match.
    let same_cfg = TrainConfig {
        max_episodes: trainer.cfg.max_episodes,
        ..cfg
    } == trainer.cfg;
    if !same_cfg || seed != trainer.seed {
        return Err(Error::Config(format!(
            "snapshot {path} was written under a different training configuration or seed"
        )));
    }
    let episode = r.u64()?;
    let total_steps = r.u64()?;
    let mut nets = Vec::with_capacity(6);
    for _ in 0..6 {
        nets.push(read_network(&mut r)?);
    }
    if nets[0].arch() != trainer.nets.actor.arch() || nets[1].arch() != trainer.nets.critic1.arch() {
        return Err(r.error("network architecture differs from the configuration"));
    }
    let actor_arch = nets[0].arch().clone();
    let critic_arch = nets[1].arch().clone();
    let opts = Optimizers {
        actor: read_adam(&mut r, &actor_arch)?,
        critic1: read_adam(&mut r, &critic_arch)?,
        critic2: read_adam(&mut r, &critic_arch)?,
    };
    let capacity = r.u64()? as usize;
    let head = r.u64()? as usize;
    let inserted = r.u64()?;
    let len = r.u64()? as usize;
    if capacity == 0 || len > capacity || (len < capacity && head != 0) || head >= capacity.max(1) {
        return Err(r.error("inconsistent replay buffer header"));
    }
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        let mut s = [0.0; OBS_DIM];
        let mut a = [0.0; ACTION_DIM];
        let mut s_next = [0.0; OBS_DIM];
        for v in s.iter_mut().chain(a.iter_mut()) {
            *v = r.f64()?;
        }
        let rew = r.f64()?;
        for v in s_next.iter_mut() {
            *v = r.f64()?;
        }
        let done = r.u8()? != 0;
        data.push(Transition {
            s,
            a,
            r: rew,
            s_next,
            done,
        });
    }
    let best = match r.u8()? {
        0 => None,
        1 => {
            let rate = r.f64()?;
            Some((rate, read_network(&mut r)?))
        }
        other => return Err(r.error(format!("bad best-actor tag {other}"))),
    };
    let log: TrainLog = serde_json::from_str(&r.str()?).map_err(|e| r.error(e.to_string()))?;
    r.finish()?;

    let mut it = nets.into_iter();
    let mut next = || it.next().expect("six networks read");
    let networks = Networks {
        actor: next(),
        critic1: next(),
        critic2: next(),
        actor_target: next(),
        critic1_target: next(),
        critic2_target: next(),
    };
    trainer.restore_parts(
        networks,
        opts,
        ReplayBuffer::from_raw_parts(data, capacity, head, inserted),
        episode,
        total_steps,
        log,
        best,
    );
    Ok(())
}

pub fn save_snapshot(path: &Path, trainer: &Trainer) -> Result<()> {
    let bytes = encode_snapshot(trainer)?;
    // Write-then-rename so an interrupted save never clobbers a good snapshot.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_snapshot(path: &Path, trainer: &mut Trainer) -> Result<()> {
    let bytes = fs::read(path)?;
    decode_snapshot_into(&bytes, &path.display().to_string(), trainer)
}
