//! Bit packing of signed codes and the 3-bit-code / 2-bit-cell layout.
//!
//! Codes are stored offset-binary (`code + 2^(b-1)`) so the stream is
//! unsigned. The stream is LSB-first: stream bit `k` lives in byte `k / 8`
//! at bit position `k % 8`, and each code occupies `b` consecutive stream
//! bits starting with its least significant bit.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{validation_err, Error, Result};

/// Bytes needed to hold `count` codes of `bits` bits.
pub fn packed_len(count: usize, bits: u8) -> usize {
    (count * bits as usize).div_ceil(8)
}

/// Packs signed codes at `bits` bits each. Trailing bits of the last byte are zero.
///
/// Codes must already lie in `[-2^(b-1), 2^(b-1) - 1]`.
pub fn pack_codes(codes: &[i16], bits: u8) -> Vec<u8> {
    debug_assert!((1..=16).contains(&bits));
    let offset = 1i32 << (bits - 1);
    let mask = (1u32 << bits) - 1;
    let mut out = vec![0u8; packed_len(codes.len(), bits)];
    let mut acc: u64 = 0;
    let mut nacc: u32 = 0;
    let mut pos = 0usize;
    for &c in codes {
        let v = ((c as i32 + offset) as u32) & mask;
        acc |= (v as u64) << nacc;
        nacc += bits as u32;
        while nacc >= 8 {
            out[pos] = acc as u8;
            pos += 1;
            acc >>= 8;
            nacc -= 8;
        }
    }
    if nacc > 0 {
        out[pos] = acc as u8;
    }
    out
}

/// Inverse of [`pack_codes`].
///
/// Fails if `bytes` has the wrong length or nonzero padding bits.
pub fn unpack_codes(bytes: &[u8], bits: u8, count: usize) -> Result<Vec<i16>> {
    if !(1..=16).contains(&bits) {
        return Err(Error::Format(alloc::format!("unsupported code width {}", bits)));
    }
    let expected = packed_len(count, bits);
    if bytes.len() != expected {
        return Err(Error::Format(alloc::format!(
            "packed stream has {} bytes, expected {}",
            bytes.len(),
            expected
        )));
    }
    let offset = 1i32 << (bits - 1);
    let mask = (1u64 << bits) - 1;
    let mut out = Vec::with_capacity(count);
    let mut acc: u64 = 0;
    let mut nacc: u32 = 0;
    let mut it = bytes.iter();
    for _ in 0..count {
        while nacc < bits as u32 {
            // Length was checked above.
            acc |= (*it.next().unwrap() as u64) << nacc;
            nacc += 8;
        }
        out.push(((acc & mask) as i32 - offset) as i16);
        acc >>= bits;
        nacc -= bits as u32;
    }
    if acc != 0 {
        return Err(Error::Format("nonzero padding bits in packed stream".into()));
    }
    Ok(out)
}

/// Packs 3-bit codes into 2-bit cells, two codes per three cells.
///
/// With offset-binary codes `c0, c1` the cells are
/// `[c0 bits 1..0]`, `[c1 bit 2, c0 bit 2]`, `[c1 bits 1..0]`.
/// An odd trailing code is paired with a zero code.
pub fn pack_cells_2bit(codes: &[i16]) -> Result<Vec<u8>> {
    let mut cells = Vec::with_capacity(codes.len().div_ceil(2) * 3);
    for pair in codes.chunks(2) {
        let c0 = offset3(pair[0])?;
        let c1 = match pair.get(1) {
            Some(&c) => offset3(c)?,
            None => offset3(0)?,
        };
        cells.push(c0 & 0b11);
        cells.push(((c1 >> 2) << 1) | (c0 >> 2));
        cells.push(c1 & 0b11);
    }
    Ok(cells)
}

/// Inverse of [`pack_cells_2bit`]; the padding code of an odd count is dropped.
pub fn unpack_cells_2bit(cells: &[u8], count: usize) -> Result<Vec<i16>> {
    if cells.len() != count.div_ceil(2) * 3 {
        return Err(validation_err!(
            "{} cells cannot hold {} three-bit codes",
            cells.len(),
            count
        ));
    }
    if let Some(c) = cells.iter().find(|&&c| c > 3) {
        return Err(validation_err!("cell state {} outside 0..=3", c));
    }
    let mut out = Vec::with_capacity(count + 1);
    for tri in cells.chunks(3) {
        let c0 = ((tri[1] & 1) << 2) | tri[0];
        let c1 = ((tri[1] >> 1) << 2) | tri[2];
        out.push(c0 as i16 - 4);
        out.push(c1 as i16 - 4);
    }
    out.truncate(count);
    Ok(out)
}

fn offset3(code: i16) -> Result<u8> {
    if !(-4..=3).contains(&code) {
        return Err(validation_err!("code {} is not a 3-bit code", code));
    }
    Ok((code + 4) as u8)
}
