//! Outlier-ratio sweep: reconstruction error against normalized energy and latency.

use alloc::vec::Vec;

use crate::error::{config_err, Result};
use crate::memsys::{cost_report, explore_bandwidth, Device, SystemConfig};
use crate::noise::NoiseModel;
use crate::pipeline::{quantize_tensor, reconstruction_sse, QuantizeOptions};
use crate::quant::{QuantizerSpec, ScaleSearchConfig};
use crate::tensor::WeightTensor;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub rho: f64,
    /// Mean squared reconstruction error over all elements of all tensors.
    pub mse: f64,
    /// Energy per weight over the FP16 / LPDDR5 energy per weight.
    pub normalized_energy: f64,
    /// Latency at the best feasible allocation over the FP16 / LPDDR5 latency.
    pub normalized_latency: f64,
    pub mram_channels: u32,
    pub reram_arrays: u32,
    pub bottleneck: Device,
}

/// For each ratio: quantize `tensors`, rerun the cost model and the
/// bandwidth exploration over `cfg.candidate_grid()`.
pub fn sweep_rho(
    cfg: &SystemConfig,
    rhos: &[f64],
    tensors: &[WeightTensor],
    noise: &NoiseModel,
    search: &ScaleSearchConfig,
) -> Result<Vec<SweepRow>> {
    if let Some(r) = rhos.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(config_err!("outlier ratio {} outside [0, 1]", r));
    }
    if tensors.is_empty() {
        return Err(config_err!("sweep needs at least one tensor"));
    }
    let inlier = QuantizerSpec::new(cfg.inlier_bits)?;
    let outlier = QuantizerSpec::new(cfg.outlier_bits)?;
    let total: usize = tensors.iter().map(|t| t.len()).sum();

    let mut rows = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let opts = QuantizeOptions {
            rho,
            inlier,
            outlier,
            noise: noise.clone(),
            search: *search,
        };
        let mut sse = 0.0;
        for t in tensors {
            let q = quantize_tensor(t, &opts)?;
            sse += reconstruction_sse(t, &q)?;
        }
        let at = SystemConfig { rho, ..cfg.clone() };
        let report = cost_report(&at)?;
        let dse = explore_bandwidth(&at, &at.candidate_grid())?;
        rows.push(SweepRow {
            rho,
            mse: sse / total as f64,
            normalized_energy: report.energy_per_weight_pj / report.baseline_energy_per_weight_pj,
            normalized_latency: dse.best.final_s() / report.baseline_latency_per_step_s,
            mram_channels: dse.best.point.mram_channels,
            reram_arrays: dse.best.point.reram_arrays,
            bottleneck: dse.best.latency.map_or(Device::Reram, |l| l.bottleneck),
        });
    }
    Ok(rows)
}
