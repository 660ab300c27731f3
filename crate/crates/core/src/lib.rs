//! Desk-scale V2X spectrum-sharing simulator and deep-RL resource allocation.
//!
//! Sub-band selection is learned with a DQN and transmit power with DDPG,
//! sharing one replay memory across V2V agents. A MAML-style meta-trainer
//! produces initializations that adapt to a new scenario from a handful of
//! slots of experience.

pub mod channel_env;
pub mod drl;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod meta;
pub mod neuralnet;
pub mod rng;

pub use error::{Error, Result};
