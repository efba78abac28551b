//! QMT (float tensors) and QMQ (quantized tensors) containers, version 1.
//!
//! Both share one header scheme: a four-byte magic, a little-endian `u32`
//! version and a `u32` tensor count. Each tensor starts with
//!
//! ```text
//! u32 name_len | name (UTF-8) | u8 ndim | u8 channel_axis | u64 dims[ndim]
//! ```
//!
//! QMT then holds the row-major `f32` payload. QMQ holds
//!
//! ```text
//! u8 inlier_bits | u8 outlier_bits | f32 rho
//! f32 inlier_scales[C] | f32 outlier_scales[C]
//! u64 outlier_count | u64 outlier_indices[outlier_count]
//! inlier code stream | outlier code stream
//! ```
//!
//! where `C` is the channel count and each code stream is the
//! offset-binary, LSB-first packing from `hetq_core::pack`, starting on a
//! byte boundary and `ceil(count * bits / 8)` bytes long.

use std::fs;
use std::path::Path;

use hetq_core::pack::{pack_codes, packed_len, unpack_codes};
use hetq_core::{QuantizedTensor, WeightTensor};

use crate::error::{Error, Result};

pub const QMT_MAGIC: &[u8; 4] = b"QMT1";
pub const QMQ_MAGIC: &[u8; 4] = b"QMQ1";
pub const VERSION: u32 = 1;

pub fn encode_qmt(tensors: &[WeightTensor]) -> Result<Vec<u8>> {
    let mut out = header(QMT_MAGIC, tensors.len())?;
    for t in tensors {
        t.validate()?;
        tensor_header(&mut out, &t.name, &t.dims, t.channel_axis)?;
        out.reserve(4 * t.data.len());
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_qmt(bytes: &[u8]) -> Result<Vec<WeightTensor>> {
    let mut r = Reader::new(bytes);
    let count = r.header(QMT_MAGIC)?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let (name, dims, channel_axis, len) = r.tensor_header()?;
        let raw = r.take(len.checked_mul(4).ok_or_else(|| Error::format("payload size overflows"))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(WeightTensor::new(name, dims, channel_axis, data)?);
    }
    r.finish()?;
    Ok(tensors)
}

pub fn encode_qmq(tensors: &[QuantizedTensor]) -> Result<Vec<u8>> {
    let mut out = header(QMQ_MAGIC, tensors.len())?;
    for q in tensors {
        q.validate()?;
        tensor_header(&mut out, &q.name, &q.dims, q.channel_axis)?;
        out.push(q.inlier_bits);
        out.push(q.outlier_bits);
        out.extend_from_slice(&q.rho.to_le_bytes());
        for s in q.inlier_scales.iter().chain(&q.outlier_scales) {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out.extend_from_slice(&(q.outlier_indices.len() as u64).to_le_bytes());
        for i in &q.outlier_indices {
            out.extend_from_slice(&i.to_le_bytes());
        }
        out.extend(pack_codes(&q.inlier_codes, q.inlier_bits));
        out.extend(pack_codes(&q.outlier_codes, q.outlier_bits));
    }
    Ok(out)
}

pub fn decode_qmq(bytes: &[u8]) -> Result<Vec<QuantizedTensor>> {
    let mut r = Reader::new(bytes);
    let count = r.header(QMQ_MAGIC)?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let (name, dims, channel_axis, len) = r.tensor_header()?;
        let channels = dims[channel_axis];
        let inlier_bits = r.u8()?;
        let outlier_bits = r.u8()?;
        for b in [inlier_bits, outlier_bits] {
            if !(2..=16).contains(&b) {
                return Err(Error::format(format!("tensor '{}': code width {} unsupported", name, b)));
            }
        }
        let rho = r.f32()?;
        let inlier_scales = r.f32_array(channels)?;
        let outlier_scales = r.f32_array(channels)?;
        let k = r.u64()?;
        if k > len as u64 {
            return Err(Error::format(format!(
                "tensor '{}': {} outliers for {} elements",
                name, k, len
            )));
        }
        let k = k as usize;
        let outlier_indices = r
            .take(8 * k)?
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let inlier_codes = unpack_codes(r.take(packed_len(len - k, inlier_bits))?, inlier_bits, len - k)?;
        let outlier_codes = unpack_codes(r.take(packed_len(k, outlier_bits))?, outlier_bits, k)?;
        let q = QuantizedTensor {
            name,
            dims,
            channel_axis,
            inlier_bits,
            outlier_bits,
            rho,
            inlier_scales,
            outlier_scales,
            outlier_indices,
            inlier_codes,
            outlier_codes,
        };
        q.validate()?;
        tensors.push(q);
    }
    r.finish()?;
    Ok(tensors)
}

pub fn load_qmt(path: impl AsRef<Path>) -> Result<Vec<WeightTensor>> {
    decode_qmt(&read(path.as_ref())?)
}

pub fn save_qmt(path: impl AsRef<Path>, tensors: &[WeightTensor]) -> Result<()> {
    write(path.as_ref(), &encode_qmt(tensors)?)
}

pub fn load_qmq(path: impl AsRef<Path>) -> Result<Vec<QuantizedTensor>> {
    decode_qmq(&read(path.as_ref())?)
}

pub fn save_qmq(path: impl AsRef<Path>, tensors: &[QuantizedTensor]) -> Result<()> {
    write(path.as_ref(), &encode_qmq(tensors)?)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn header(magic: &[u8; 4], count: usize) -> Result<Vec<u8>> {
    let count = u32::try_from(count).map_err(|_| Error::format("more than u32::MAX tensors"))?;
    let mut out = Vec::with_capacity(12);
    out.extend_from_slice(magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    Ok(out)
}

fn tensor_header(out: &mut Vec<u8>, name: &str, dims: &[usize], channel_axis: usize) -> Result<()> {
    let name_len = u32::try_from(name.len()).map_err(|_| Error::format("tensor name too long"))?;
    out.extend_from_slice(&name_len.to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    // Rank and axis fit in a byte: validation caps the rank at 255.
    out.push(dims.len() as u8);
    out.push(channel_axis as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::format(format!(
                    "truncated: need {} bytes at offset {}, file has {}",
                    n,
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32_array(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::format("array size overflows"))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<u32> {
        let found = self.take(4)?;
        if found != magic {
            return Err(Error::format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32()?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported version {}", version)));
        }
        self.u32()
    }

    /// Name, dims, channel axis and element count, with the shape checked
    /// before any payload is read.
    fn tensor_header(&mut self) -> Result<(String, Vec<usize>, usize, usize)> {
        let name_len = self.u32()? as usize;
        let name = std::str::from_utf8(self.take(name_len)?)
            .map_err(|_| Error::format("tensor name is not UTF-8"))?
            .to_string();
        let ndim = self.u8()? as usize;
        let channel_axis = self.u8()? as usize;
        if ndim == 0 || channel_axis >= ndim {
            return Err(Error::format(format!(
                "tensor '{}': rank {} with channel axis {}",
                name, ndim, channel_axis
            )));
        }
        let mut dims = Vec::with_capacity(ndim);
        let mut len: usize = 1;
        for _ in 0..ndim {
            let d = usize::try_from(self.u64()?)
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::format(format!("tensor '{}': bad dimension", name)))?;
            len = len
                .checked_mul(d)
                .ok_or_else(|| Error::format(format!("tensor '{}': element count overflows", name)))?;
            dims.push(d);
        }
        Ok((name, dims, channel_axis, len))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(format!(
                "{} trailing bytes after last tensor",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}
