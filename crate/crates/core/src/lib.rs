//! Outlier-aware dual-precision weight quantization for heterogeneous
//! non-volatile weight stores.
//!
//! The crate is `no_std` + `alloc`. It holds the numerical core only:
//!
//! * [`partition`] splits a tensor into outliers and inliers by magnitude.
//! * [`quant`] is the uniform per-channel quantizer together with the
//!   MSE-optimal and noise-aware scale searches.
//! * [`pipeline`] runs the full partition / quantize / merge flow and its inverse.
//! * [`noise`] models multi-level-cell read errors on stored codes.
//! * [`memsys`] is the analytical latency, power, energy and area model plus
//!   the bandwidth design-space exploration.
//! * [`sweep`] ties the quantizer and the cost model together over outlier ratios.
//!
//! File formats, configuration files and the command-line front end live in
//! the companion `hetq` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod error;
mod math;
pub mod memsys;
pub mod noise;
pub mod pack;
pub mod partition;
pub mod pipeline;
pub mod quant;
pub mod sweep;
pub mod tensor;

pub use error::{Error, Result};
pub use memsys::{CostReport, MemoryDevice, SystemConfig};
pub use noise::NoiseModel;
pub use partition::PartitionMask;
pub use pipeline::{dequantize, quantize_tensor, QuantizeOptions};
pub use quant::{QuantizerSpec, ScaleSearchConfig};
pub use tensor::{QuantizedTensor, WeightTensor};
