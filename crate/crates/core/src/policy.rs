use ndarray::Array2;

use crate::env::{Action, Observation, ACTION_DIM, OBS_DIM};
use crate::error::Result;
use crate::nn::Mlp;

/// Anything that can fly an episode.
pub trait Policy: Send {
    /// Clears per-episode internal state (integrators, filters).
    fn reset(&mut self) {}

    fn act(&mut self, obs: &Observation) -> Action;
}

/// Deterministic actor network acting on scaled observations.
#[derive(Debug, Clone)]
pub struct ActorPolicy {
    net: Mlp,
}

impl ActorPolicy {
    pub fn new(net: Mlp) -> Result<Self> {
        let a = net.arch();
        if a.input != OBS_DIM || a.output != ACTION_DIM {
            return Err(crate::Error::Shape(format!(
                "actor must map {OBS_DIM} -> {ACTION_DIM}, got {} -> {}",
                a.input, a.output
            )));
        }
        Ok(ActorPolicy { net })
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    /// Raw tanh outputs before action decoding.
    pub fn raw(&self, obs: &Observation) -> [f64; ACTION_DIM] {
        actor_raw(&self.net, obs)
    }
}

/// Raw outputs of a 13 -> 4 network on the scaled observation.
pub(crate) fn actor_raw(net: &Mlp, obs: &Observation) -> [f64; ACTION_DIM] {
    let input = Array2::from_shape_vec((1, OBS_DIM), obs.scaled().to_vec()).unwrap();
    let out = net.predict(input.view()).expect("actor shape checked by caller");
    [out[[0, 0]], out[[0, 1]], out[[0, 2]], out[[0, 3]]]
}

impl Policy for ActorPolicy {
    fn act(&mut self, obs: &Observation) -> Action {
        Action::from_raw(&self.raw(obs))
    }
}
