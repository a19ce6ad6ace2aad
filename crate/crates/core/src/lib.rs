//! Pursuit-lock-launch air engagement simulator and an imitative twin-critic
//! learner that blends behavior cloning into actor-critic training.

pub mod cli;
pub mod codec;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod expert;
pub mod flightsim;
pub mod nn;
pub mod policy;
pub mod rl;

pub use error::{Error, Result};
