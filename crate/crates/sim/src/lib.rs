//! File formats, experiment harness and command-line front end for
//! [`uabs_core`].

pub mod archive;
pub mod checkpoint;
mod codec;
pub mod config;
pub mod harness;
pub mod manifest;
pub mod metrics;
pub mod trace;
