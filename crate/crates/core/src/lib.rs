//! Simulation and learning core for an unmanned aerial base station (UABS)
//! collecting packets from moving ground users (GUEs).
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`env`]: the episodic world (GUE mobility, UABS motion, packets, encoding)
//! - [`channel`]: air-to-ground LoS/NLoS link model and the capped reward
//! - [`policy`]: a small tanh MLP with a softmax head and exact score gradients
//! - [`reinforce`]: plain Monte-Carlo policy gradient training on one task
//! - [`comps`]: continual meta policy search over an archive of past tasks
//!
//! Everything that touches files, configuration or threads lives in the
//! `uabs-sim` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod channel;
pub mod comps;
pub mod env;
pub mod geom;
pub mod policy;
pub mod reinforce;
pub mod seed;

pub use channel::{ChannelParams, LinkMode, RewardParams};
pub use comps::{MetaConfig, MetaGradMode, MetaState, TaskArchiveEntry};
pub use env::{Action, AreaSpec, EncoderConfig, Simulator, TaskConfig, WorldState};
pub use geom::Vec2;
pub use policy::{PolicyArch, PolicyParams};
pub use reinforce::{Episode, RLConfig, StepRecord};
