//! Symmetric uniform quantizer and grid scale searches.
//!
//! `code = clamp(round_half_even(v / s), qmin, qmax)`, reconstruction is
//! `code * s`, and the quantization step equals the scale.

use alloc::vec::Vec;

use crate::error::{config_err, Result};
use crate::math::{powf, round_even};
use crate::noise::NoiseModel;

/// Signed `b`-bit integer grid `[-2^(b-1), 2^(b-1) - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantizerSpec {
    bits: u8,
}

impl QuantizerSpec {
    pub const MIN_BITS: u8 = 2;
    /// Wide enough for lossless 16-bit outlier round trips.
    pub const MAX_BITS: u8 = 16;

    pub fn new(bits: u8) -> Result<Self> {
        if !(Self::MIN_BITS..=Self::MAX_BITS).contains(&bits) {
            return Err(config_err!(
                "bit-width {} outside [{}, {}]",
                bits,
                Self::MIN_BITS,
                Self::MAX_BITS
            ));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn qmin(&self) -> i32 {
        -(1 << (self.bits - 1))
    }

    pub fn qmax(&self) -> i32 {
        (1 << (self.bits - 1)) - 1
    }

    pub fn levels(&self) -> usize {
        1 << self.bits
    }
}

/// Geometric grid of candidate scales spanning
/// `[alpha_lo, alpha_hi] * max|w| / qmax`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScaleSearchConfig {
    pub grid_points: usize,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl Default for ScaleSearchConfig {
    fn default() -> Self {
        Self {
            grid_points: 128,
            alpha_lo: 0.3,
            alpha_hi: 1.0,
        }
    }
}

impl ScaleSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(config_err!("scale grid needs at least 2 points"));
        }
        if !(self.alpha_lo > 0.0 && self.alpha_lo < self.alpha_hi && self.alpha_hi <= 1.0) {
            return Err(config_err!(
                "scale range [{}, {}] must satisfy 0 < lo < hi <= 1",
                self.alpha_lo,
                self.alpha_hi
            ));
        }
        Ok(())
    }

    /// Ascending candidate scales for values whose largest magnitude is `max_abs`.
    ///
    /// Candidates are rounded to `f32` so a chosen scale survives storage unchanged.
    /// Returns an empty grid when `max_abs` is zero.
    pub fn candidates(&self, max_abs: f64, spec: QuantizerSpec) -> Vec<f64> {
        if max_abs <= 0.0 {
            return Vec::new();
        }
        let base = max_abs / spec.qmax() as f64;
        let ratio = self.alpha_hi / self.alpha_lo;
        let last = (self.grid_points - 1) as f64;
        (0..self.grid_points)
            .map(|k| {
                let alpha = self.alpha_lo * powf(ratio, k as f64 / last);
                (alpha * base) as f32 as f64
            })
            .collect()
    }
}

#[inline]
pub fn quantize_value(v: f64, scale: f64, spec: QuantizerSpec) -> i16 {
    let q = round_even(v / scale);
    q.clamp(spec.qmin() as f64, spec.qmax() as f64) as i16
}

/// Quantizes one channel at a fixed scale.
pub fn quantize_channel(values: &[f64], scale: f64, spec: QuantizerSpec) -> Result<Vec<i16>> {
    check_scale(scale)?;
    Ok(values
        .iter()
        .map(|&v| quantize_value(v, scale, spec))
        .collect())
}

pub fn dequantize_channel(codes: &[i16], scale: f64) -> Vec<f64> {
    codes.iter().map(|&c| c as f64 * scale).collect()
}

/// `||w - Q(w; s)||^2`.
pub fn squared_error(values: &[f64], scale: f64, spec: QuantizerSpec) -> f64 {
    values
        .iter()
        .map(|&v| {
            let d = v - quantize_value(v, scale, spec) as f64 * scale;
            d * d
        })
        .sum()
}

/// Expected squared error under symmetric adjacent-level read noise:
/// `||w - Q(w; s)||^2 + n * (p_minus + p_plus) * s^2`.
///
/// The closed form drops the cross term, which is exact when
/// `p_minus == p_plus`, and ignores one-sided boundary states.
pub fn expected_distortion(
    values: &[f64],
    scale: f64,
    spec: QuantizerSpec,
    noise: &NoiseModel,
) -> Result<f64> {
    check_scale(scale)?;
    Ok(distortion_unchecked(values, scale, spec, noise.flip_probability()))
}

fn distortion_unchecked(values: &[f64], scale: f64, spec: QuantizerSpec, flip: f64) -> f64 {
    squared_error(values, scale, spec) + values.len() as f64 * flip * scale * scale
}

/// Grid argmin of the plain reconstruction error. Returns 0 for all-zero input.
pub fn mse_optimal_scale(
    values: &[f64],
    spec: QuantizerSpec,
    search: &ScaleSearchConfig,
) -> Result<f64> {
    grid_argmin(values, spec, search, |s| squared_error(values, s, spec))
}

/// Grid argmin of [`expected_distortion`]. Returns 0 for all-zero input.
pub fn noise_aware_scale(
    values: &[f64],
    spec: QuantizerSpec,
    noise: &NoiseModel,
    search: &ScaleSearchConfig,
) -> Result<f64> {
    let flip = noise.flip_probability();
    grid_argmin(values, spec, search, |s| {
        distortion_unchecked(values, s, spec, flip)
    })
}

fn grid_argmin(
    values: &[f64],
    spec: QuantizerSpec,
    search: &ScaleSearchConfig,
    objective: impl Fn(f64) -> f64,
) -> Result<f64> {
    search.validate()?;
    if values.is_empty() {
        return Err(config_err!("scale search over an empty value set"));
    }
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut best = (0.0, f64::INFINITY);
    // Ascending grid with a strict comparison keeps the smallest minimizer.
    for s in search.candidates(max_abs, spec) {
        let obj = objective(s);
        if obj < best.1 {
            best = (s, obj);
        }
    }
    Ok(best.0)
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(config_err!("scale {} must be positive and finite", scale));
    }
    Ok(())
}
