//! Multi-level-cell read-error models.
//!
//! The default model moves a stored state one level down or up with
//! probabilities `p_minus` / `p_plus`. A full row-stochastic confusion
//! matrix can replace it when measured state-to-state data is available.
//! Every sampler draws from a ChaCha8 stream seeded by `NoiseModel::seed`,
//! so identical models produce identical perturbations.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, validation_err, Result};
use crate::pack::{pack_cells_2bit, unpack_cells_2bit};
use crate::quant::QuantizerSpec;

const PROB_TOL: f64 = 1e-12;
const ROW_TOL: f64 = 1e-9;

/// Row-stochastic `S x S` state transition matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    states: usize,
    rows: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let states = rows.len();
        if states < 2 {
            return Err(validation_err!("confusion matrix needs at least 2 states"));
        }
        let mut flat = Vec::with_capacity(states * states);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != states {
                return Err(validation_err!(
                    "confusion row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    states
                ));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(validation_err!("confusion row {} has a negative or non-finite entry", i));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(validation_err!("confusion row {} sums to {}", i, sum));
            }
            flat.extend_from_slice(row);
        }
        Ok(Self { states, rows: flat })
    }

    pub fn identity(states: usize) -> Self {
        let mut rows = alloc::vec![0.0; states * states];
        for i in 0..states {
            rows[i * states + i] = 1.0;
        }
        Self { states, rows }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.rows[state * self.states..(state + 1) * self.states]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.rows.chunks(self.states).map(|r| r.to_vec()).collect()
    }

    fn sample<R: Rng>(&self, state: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, p) in self.row(state).iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // Rounding slack in the row sum lands on the last nonzero state.
        self.row(state)
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(state)
    }
}

/// Read-error model for one MLC mode.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseModel {
    pub mlc_bits: u8,
    pub p_minus: f64,
    pub p_zero: f64,
    pub p_plus: f64,
    pub confusion: Option<ConfusionMatrix>,
    pub seed: u64,
}

impl NoiseModel {
    /// Adjacent-level model; `p_zero = 1 - p_minus - p_plus`.
    pub fn adjacent(mlc_bits: u8, p_minus: f64, p_plus: f64, seed: u64) -> Result<Self> {
        let m = Self {
            mlc_bits,
            p_minus,
            p_zero: 1.0 - p_minus - p_plus,
            p_plus,
            confusion: None,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    /// Placeholder probabilities: 1% per direction in 3-bit mode and 0.1% in
    /// 2-bit mode. They are not measured device values.
    pub fn default_for_mlc(mlc_bits: u8) -> Result<Self> {
        match mlc_bits {
            3 => Self::adjacent(3, 0.01, 0.01, 0),
            2 => Self::adjacent(2, 0.001, 0.001, 0),
            b => Err(config_err!("MLC mode must be 2 or 3 bits, got {}", b)),
        }
    }

    pub fn noiseless(mlc_bits: u8) -> Self {
        Self {
            mlc_bits,
            p_minus: 0.0,
            p_zero: 1.0,
            p_plus: 0.0,
            confusion: None,
            seed: 0,
        }
    }

    pub fn with_confusion(mut self, matrix: ConfusionMatrix) -> Result<Self> {
        self.confusion = Some(matrix);
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `p_minus + p_plus`, the per-read probability of a one-level error.
    pub fn flip_probability(&self) -> f64 {
        self.p_minus + self.p_plus
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mlc_bits == 2 || self.mlc_bits == 3) {
            return Err(config_err!("MLC mode must be 2 or 3 bits, got {}", self.mlc_bits));
        }
        for (name, p) in [
            ("p_minus", self.p_minus),
            ("p_zero", self.p_zero),
            ("p_plus", self.p_plus),
        ] {
            if !(p.is_finite() && (-PROB_TOL..=1.0 + PROB_TOL).contains(&p)) {
                return Err(config_err!("{} = {} is not a probability", name, p));
            }
        }
        let sum = self.p_minus + self.p_zero + self.p_plus;
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(config_err!("transition probabilities sum to {}", sum));
        }
        if let Some(m) = &self.confusion {
            let expect = 1usize << self.mlc_bits;
            if m.states != expect {
                return Err(config_err!(
                    "confusion matrix has {} states, {}-bit MLC needs {}",
                    m.states,
                    self.mlc_bits,
                    expect
                ));
            }
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// One adjacent-model read of `state` in `0..states`; out-of-range moves are suppressed.
    fn step_adjacent<R: Rng>(&self, state: usize, states: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        if u < self.p_minus {
            state.saturating_sub(1)
        } else if u < self.p_minus + self.p_plus {
            (state + 1).min(states - 1)
        } else {
            state
        }
    }

    fn read_state<R: Rng>(&self, state: usize, states: usize, rng: &mut R) -> usize {
        match &self.confusion {
            Some(m) if m.states == states => m.sample(state, rng),
            _ => self.step_adjacent(state, states, rng),
        }
    }
}

/// Perturbs each code by at most one quantization level.
///
/// Codes are treated as states `code - qmin`. When the model carries a
/// confusion matrix with exactly `2^bits` states that matrix is used;
/// otherwise the adjacent-level model applies, with shifts past `qmin`
/// or `qmax` suppressed.
pub fn perturb_codes(codes: &[i16], spec: QuantizerSpec, noise: &NoiseModel) -> Vec<i16> {
    let mut rng = noise.rng();
    let states = spec.levels();
    let qmin = spec.qmin();
    codes
        .iter()
        .map(|&c| {
            let s = (c as i32 - qmin) as usize;
            (noise.read_state(s, states, &mut rng) as i32 + qmin) as i16
        })
        .collect()
}

/// Stores 3-bit codes in 2-bit cells, perturbs every cell, and reads the codes back.
///
/// One cell error can move a code by more than one level because a cell
/// may hold a code's most significant bit.
pub fn perturb_cells_2bit(codes: &[i16], noise: &NoiseModel) -> Result<Vec<i16>> {
    if noise.mlc_bits != 2 {
        return Err(config_err!(
            "cell-level injection needs a 2-bit MLC model, got {} bits",
            noise.mlc_bits
        ));
    }
    let mut cells = pack_cells_2bit(codes)?;
    let mut rng = noise.rng();
    for cell in cells.iter_mut() {
        *cell = noise.read_state(*cell as usize, 4, &mut rng) as u8;
    }
    unpack_cells_2bit(&cells, codes.len())
}

/// Monte-Carlo estimate of the per-read state-error probability.
///
/// The adjacent model is sampled without boundary states, so the estimate
/// converges to `p_minus + p_plus`. A confusion matrix is sampled from
/// uniformly drawn stored states.
pub fn empirical_ber(noise: &NoiseModel, samples: u64) -> Result<f64> {
    if samples == 0 {
        return Err(config_err!("empirical BER needs at least one sample"));
    }
    let mut rng = noise.rng();
    let mut errors = 0u64;
    match &noise.confusion {
        Some(m) => {
            for _ in 0..samples {
                let s = rng.random_range(0..m.states);
                if m.sample(s, &mut rng) != s {
                    errors += 1;
                }
            }
        }
        None => {
            let flip = noise.flip_probability();
            for _ in 0..samples {
                let u: f64 = rng.random();
                if u < flip {
                    errors += 1;
                }
            }
        }
    }
    Ok(errors as f64 / samples as f64)
}
