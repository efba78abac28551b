//! File formats, configuration files and the `hetq` command line on top of
//! [`hetq_core`].
//!
//! * [`format`]: the QMT and QMQ binary containers.
//! * [`config`]: TOML system and noise configuration.
//! * [`manifest`]: per-run manifests for reproducible outputs.
//! * [`sample`]: synthetic Gaussian weight tensors.
//! * [`cli`]: the subcommands behind the binary.

pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod manifest;
pub mod sample;

pub use error::{Error, Result};
