//! Weight tensors and their dual-precision quantized form.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{validation_err, Result};
use crate::partition::outlier_count;
use crate::quant::QuantizerSpec;

/// A named, row-major `f32` tensor with a designated channel axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub channel_axis: usize,
    pub data: Vec<f32>,
}

impl WeightTensor {
    /// Builds a tensor and checks every invariant.
    pub fn new(
        name: impl Into<String>,
        dims: Vec<usize>,
        channel_axis: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        let t = Self {
            name: name.into(),
            dims,
            channel_axis,
            data,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let layout = Layout::new(&self.dims, self.channel_axis)?;
        if layout.len != self.data.len() {
            return Err(validation_err!(
                "tensor '{}': dims {:?} describe {} elements but data has {}",
                self.name,
                self.dims,
                layout.len,
                self.data.len()
            ));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(validation_err!(
                "tensor '{}': non-finite value {} at flat index {}",
                self.name,
                self.data[i],
                i
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of channels along the channel axis.
    pub fn channels(&self) -> usize {
        self.dims[self.channel_axis]
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::from_valid(&self.dims, self.channel_axis)
    }
}

/// Shape bookkeeping shared by float and quantized tensors.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub len: usize,
    pub channels: usize,
    /// Distance in flat index between consecutive positions on the channel axis.
    pub stride: usize,
}

impl Layout {
    pub fn new(dims: &[usize], channel_axis: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(validation_err!("tensor has no dimensions"));
        }
        if dims.len() > u8::MAX as usize {
            return Err(validation_err!("tensor rank {} exceeds 255", dims.len()));
        }
        if channel_axis >= dims.len() {
            return Err(validation_err!(
                "channel axis {} out of range for rank {}",
                channel_axis,
                dims.len()
            ));
        }
        if let Some(d) = dims.iter().position(|&d| d == 0) {
            return Err(validation_err!("dimension {} is zero", d));
        }
        let mut len: usize = 1;
        for &d in dims {
            len = len
                .checked_mul(d)
                .ok_or_else(|| validation_err!("element count overflows usize"))?;
        }
        Ok(Self::from_valid(dims, channel_axis))
    }

    pub fn from_valid(dims: &[usize], channel_axis: usize) -> Self {
        Self {
            len: dims.iter().product(),
            channels: dims[channel_axis],
            stride: dims[channel_axis + 1..].iter().product(),
        }
    }

    #[inline]
    pub fn channel_of(&self, flat: usize) -> usize {
        (flat / self.stride) % self.channels
    }
}

/// Dual-precision quantized tensor.
///
/// Inlier codes are listed in ascending flat-index order of the inlier
/// positions; outlier codes follow `outlier_indices`. Codes are kept
/// unpacked in memory and bit-packed only on serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub channel_axis: usize,
    pub inlier_bits: u8,
    pub outlier_bits: u8,
    pub rho: f32,
    pub inlier_scales: Vec<f32>,
    pub outlier_scales: Vec<f32>,
    pub outlier_indices: Vec<u64>,
    pub inlier_codes: Vec<i16>,
    pub outlier_codes: Vec<i16>,
}

impl QuantizedTensor {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.dims[self.channel_axis]
    }

    /// Payload bits per weight, excluding scales and indices.
    pub fn payload_bits_per_weight(&self) -> f64 {
        let n = self.len() as f64;
        (self.inlier_codes.len() as f64 * self.inlier_bits as f64
            + self.outlier_codes.len() as f64 * self.outlier_bits as f64)
            / n
    }

    /// Bits spent on scales (two f32 per channel) and outlier indices (u64 each).
    pub fn metadata_bits(&self) -> u64 {
        32 * (self.inlier_scales.len() + self.outlier_scales.len()) as u64
            + 64 * self.outlier_indices.len() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let layout = Layout::new(&self.dims, self.channel_axis)?;
        let inlier = QuantizerSpec::new(self.inlier_bits)?;
        let outlier = QuantizerSpec::new(self.outlier_bits)?;
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(validation_err!("rho {} outside [0, 1]", self.rho));
        }
        for (label, scales) in [
            ("inlier", &self.inlier_scales),
            ("outlier", &self.outlier_scales),
        ] {
            if scales.len() != layout.channels {
                return Err(validation_err!(
                    "{} scale count {} != channel count {}",
                    label,
                    scales.len(),
                    layout.channels
                ));
            }
            if let Some(s) = scales.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
                return Err(validation_err!("{} scale {} is not finite and >= 0", label, s));
            }
        }

        let k = outlier_count(self.rho as f64, layout.len);
        if self.outlier_indices.len() != k {
            return Err(validation_err!(
                "expected {} outlier indices for rho {} over {} elements, found {}",
                k,
                self.rho,
                layout.len,
                self.outlier_indices.len()
            ));
        }
        for w in self.outlier_indices.windows(2) {
            if w[0] >= w[1] {
                return Err(validation_err!("outlier indices not strictly increasing"));
            }
        }
        if let Some(&last) = self.outlier_indices.last() {
            if last >= layout.len as u64 {
                return Err(validation_err!(
                    "outlier index {} out of range for {} elements",
                    last,
                    layout.len
                ));
            }
        }
        if self.outlier_codes.len() != k || self.inlier_codes.len() != layout.len - k {
            return Err(validation_err!(
                "code counts ({} inlier, {} outlier) do not match partition ({} / {})",
                self.inlier_codes.len(),
                self.outlier_codes.len(),
                layout.len - k,
                k
            ));
        }
        check_codes("inlier", &self.inlier_codes, inlier)?;
        check_codes("outlier", &self.outlier_codes, outlier)?;

        // A zero scale is only a sentinel for a channel whose codes are all zero.
        let mut oi = 0usize;
        let mut ii = 0usize;
        for flat in 0..layout.len {
            let ch = layout.channel_of(flat);
            if oi < k && self.outlier_indices[oi] == flat as u64 {
                if self.outlier_scales[ch] == 0.0 && self.outlier_codes[oi] != 0 {
                    return Err(validation_err!("nonzero outlier code in zero-scale channel {}", ch));
                }
                oi += 1;
            } else {
                if self.inlier_scales[ch] == 0.0 && self.inlier_codes[ii] != 0 {
                    return Err(validation_err!("nonzero inlier code in zero-scale channel {}", ch));
                }
                ii += 1;
            }
        }
        Ok(())
    }
}

fn check_codes(label: &str, codes: &[i16], spec: QuantizerSpec) -> Result<()> {
    match codes
        .iter()
        .find(|&&c| (c as i32) < spec.qmin() || (c as i32) > spec.qmax())
    {
        Some(c) => Err(validation_err!(
            "{} code {} outside [{}, {}]",
            label,
            c,
            spec.qmin(),
            spec.qmax()
        )),
        None => Ok(()),
    }
}
