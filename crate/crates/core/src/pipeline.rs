//! End-to-end dual-precision quantization of one tensor and its inverse.
//!
//! 1. Select the top-`rho` weights by magnitude.
//! 2. Quantize each channel's inliers at the noise-aware scale.
//! 3. Quantize each channel's outliers at the MSE-optimal scale.
//! 4. Scatter both reconstructions back to their positions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, validation_err, Result};
use crate::noise::NoiseModel;
use crate::partition::select_outliers;
use crate::quant::{
    mse_optimal_scale, noise_aware_scale, quantize_value, QuantizerSpec, ScaleSearchConfig,
};
use crate::tensor::{QuantizedTensor, WeightTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeOptions {
    pub rho: f64,
    pub inlier: QuantizerSpec,
    pub outlier: QuantizerSpec,
    /// Read-noise model of the inlier store; drives the inlier scale search.
    pub noise: NoiseModel,
    pub search: ScaleSearchConfig,
}

impl QuantizeOptions {
    /// 3-bit inliers, 5-bit outliers, `rho = 0.3`, default noise for 3-bit MLC.
    pub fn standard() -> Self {
        Self {
            rho: 0.3,
            inlier: QuantizerSpec::new(3).unwrap(),
            outlier: QuantizerSpec::new(5).unwrap(),
            noise: NoiseModel::default_for_mlc(3).unwrap(),
            search: ScaleSearchConfig::default(),
        }
    }
}

pub fn quantize_tensor(tensor: &WeightTensor, opts: &QuantizeOptions) -> Result<QuantizedTensor> {
    tensor.validate()?;
    opts.search.validate()?;
    opts.noise.validate()?;
    if !(0.0..=1.0).contains(&opts.rho) {
        return Err(config_err!("outlier ratio {} outside [0, 1]", opts.rho));
    }
    // The ratio is stored as f32; partition with the stored value so the
    // outlier count can be re-derived from the artifact.
    let rho = opts.rho as f32;
    let mask = select_outliers(tensor, rho as f64)?;
    let layout = tensor.layout();
    let flags = mask.outlier_flags(layout.len);

    let mut inlier_vals: Vec<Vec<f64>> = vec![Vec::new(); layout.channels];
    let mut outlier_vals: Vec<Vec<f64>> = vec![Vec::new(); layout.channels];
    for (i, &v) in tensor.data.iter().enumerate() {
        let ch = layout.channel_of(i);
        if flags[i] {
            outlier_vals[ch].push(v as f64);
        } else {
            inlier_vals[ch].push(v as f64);
        }
    }

    let mut inlier_scales = Vec::with_capacity(layout.channels);
    let mut outlier_scales = Vec::with_capacity(layout.channels);
    for ch in 0..layout.channels {
        let s_in = if inlier_vals[ch].is_empty() {
            0.0
        } else {
            noise_aware_scale(&inlier_vals[ch], opts.inlier, &opts.noise, &opts.search)?
        };
        let s_out = if outlier_vals[ch].is_empty() {
            0.0
        } else {
            mse_optimal_scale(&outlier_vals[ch], opts.outlier, &opts.search)?
        };
        inlier_scales.push(s_in as f32);
        outlier_scales.push(s_out as f32);
    }

    let mut inlier_codes = Vec::with_capacity(layout.len - mask.outlier_indices.len());
    let mut outlier_codes = Vec::with_capacity(mask.outlier_indices.len());
    for (i, &v) in tensor.data.iter().enumerate() {
        let ch = layout.channel_of(i);
        let (scale, spec, dst) = if flags[i] {
            (outlier_scales[ch], opts.outlier, &mut outlier_codes)
        } else {
            (inlier_scales[ch], opts.inlier, &mut inlier_codes)
        };
        dst.push(if scale > 0.0 {
            quantize_value(v as f64, scale as f64, spec)
        } else {
            0
        });
    }

    Ok(QuantizedTensor {
        name: tensor.name.clone(),
        dims: tensor.dims.clone(),
        channel_axis: tensor.channel_axis,
        inlier_bits: opts.inlier.bits(),
        outlier_bits: opts.outlier.bits(),
        rho,
        inlier_scales,
        outlier_scales,
        outlier_indices: mask.outlier_indices.iter().map(|&i| i as u64).collect(),
        inlier_codes,
        outlier_codes,
    })
}

/// Scatters inlier and outlier reconstructions back into a dense tensor.
pub fn dequantize(q: &QuantizedTensor) -> Result<WeightTensor> {
    let layout = crate::tensor::Layout::new(&q.dims, q.channel_axis)?;
    if q.inlier_scales.len() != layout.channels || q.outlier_scales.len() != layout.channels {
        return Err(validation_err!("scale arrays do not match channel count"));
    }
    let k = q.outlier_indices.len();
    if q.outlier_codes.len() != k || q.inlier_codes.len() + k != layout.len {
        return Err(validation_err!("code counts do not cover the tensor"));
    }
    let mut data = vec![0.0f32; layout.len];
    let mut is_outlier = vec![false; layout.len];
    let mut prev: Option<u64> = None;
    for (&idx, &code) in q.outlier_indices.iter().zip(&q.outlier_codes) {
        if idx >= layout.len as u64 || prev.is_some_and(|p| p >= idx) {
            return Err(validation_err!(
                "outlier index {} out of range or out of order",
                idx
            ));
        }
        prev = Some(idx);
        let i = idx as usize;
        is_outlier[i] = true;
        data[i] = code as f32 * q.outlier_scales[layout.channel_of(i)];
    }
    let mut inliers = q.inlier_codes.iter();
    for i in 0..layout.len {
        if !is_outlier[i] {
            let code = *inliers.next().unwrap();
            data[i] = code as f32 * q.inlier_scales[layout.channel_of(i)];
        }
    }
    Ok(WeightTensor {
        name: q.name.clone(),
        dims: q.dims.clone(),
        channel_axis: q.channel_axis,
        data,
    })
}

/// Sum of squared differences between a tensor and its reconstruction.
pub fn reconstruction_sse(original: &WeightTensor, q: &QuantizedTensor) -> Result<f64> {
    let recon = dequantize(q)?;
    if recon.data.len() != original.data.len() {
        return Err(validation_err!("reconstruction size mismatch"));
    }
    Ok(original
        .data
        .iter()
        .zip(&recon.data)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(rho: f64) -> QuantizeOptions {
        QuantizeOptions {
            rho,
            ..QuantizeOptions::standard()
        }
    }

    fn two_channel() -> WeightTensor {
        // Two rows (channel axis 0), one dominant weight per row.
        WeightTensor::new(
            "w",
            vec![2, 4],
            0,
            vec![0.10, -0.20, 0.15, 4.0, -0.12, 0.18, -3.5, 0.05],
        )
        .unwrap()
    }

    #[test]
    fn rho_zero_has_no_outlier_payload() {
        let q = quantize_tensor(&two_channel(), &opts(0.0)).unwrap();
        q.validate().unwrap();
        assert!(q.outlier_indices.is_empty());
        assert!(q.outlier_codes.is_empty());
        assert_eq!(q.outlier_scales, vec![0.0, 0.0]);
        assert_eq!(q.inlier_codes.len(), 8);
    }

    #[test]
    fn rho_one_routes_everything_to_outliers() {
        let q = quantize_tensor(&two_channel(), &opts(1.0)).unwrap();
        q.validate().unwrap();
        assert_eq!(q.outlier_indices, (0..8).collect::<Vec<u64>>());
        assert!(q.inlier_codes.is_empty());
        assert_eq!(q.inlier_scales, vec![0.0, 0.0]);
        assert_eq!(q.outlier_bits, 5);
    }

    #[test]
    fn dominant_weights_become_outliers_and_error_drops() {
        let t = two_channel();
        let with = quantize_tensor(&t, &opts(0.25)).unwrap();
        let without = quantize_tensor(&t, &opts(0.0)).unwrap();
        assert_eq!(with.outlier_indices, vec![3, 6]);
        let e_with = reconstruction_sse(&t, &with).unwrap();
        let e_without = reconstruction_sse(&t, &without).unwrap();
        assert!(e_with < e_without, "{} !< {}", e_with, e_without);
    }

    #[test]
    fn grid_aligned_tensor_is_exact() {
        let mut o = opts(0.25);
        o.noise = NoiseModel::noiseless(3);
        // Per row: inliers on a 0.25 grid with max 0.75 = 3 * 0.25,
        // outlier alone in its channel at 15 * 0.5.
        let t = WeightTensor::new(
            "g",
            vec![2, 4],
            0,
            vec![0.25, -0.5, 0.75, 7.5, -0.75, 0.5, -7.5, 0.0],
        )
        .unwrap();
        let q = quantize_tensor(&t, &o).unwrap();
        assert_eq!(dequantize(&q).unwrap().data, t.data);
    }

    #[test]
    fn dequantize_rejects_bad_indices() {
        let mut q = quantize_tensor(&two_channel(), &opts(0.25)).unwrap();
        q.outlier_indices[1] = 99;
        assert!(dequantize(&q).is_err());
        let mut q = quantize_tensor(&two_channel(), &opts(0.25)).unwrap();
        q.outlier_indices.swap(0, 1);
        assert!(dequantize(&q).is_err());
    }

    #[test]
    fn quantizing_reconstruction_is_idempotent() {
        let t = two_channel();
        let q = quantize_tensor(&t, &opts(0.25)).unwrap();
        let r = dequantize(&q).unwrap();
        let layout = r.layout();
        let mut ii = 0;
        let mut oi = 0;
        for (i, &v) in r.data.iter().enumerate() {
            let ch = layout.channel_of(i);
            if q.outlier_indices.get(oi) == Some(&(i as u64)) {
                let c = quantize_value(v as f64, q.outlier_scales[ch] as f64, QuantizerSpec::new(5).unwrap());
                assert_eq!(c, q.outlier_codes[oi]);
                oi += 1;
            } else {
                let c = quantize_value(v as f64, q.inlier_scales[ch] as f64, QuantizerSpec::new(3).unwrap());
                assert_eq!(c, q.inlier_codes[ii]);
                ii += 1;
            }
        }
    }
}
