//! Synthetic weight tensors for demos and tests.

use hetq_core::WeightTensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SampleSpec {
    pub tensors: usize,
    pub rows: usize,
    pub cols: usize,
    pub std: f64,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            tensors: 4,
            rows: 64,
            cols: 40,
            std: 0.02,
            seed: 0,
        }
    }
}

/// `rows x cols` Gaussian matrices with the channel axis on rows. Each row
/// gets its own spread, log-normally scattered around `std`, so channels
/// differ the way trained layers do.
pub fn gaussian_tensors(spec: &SampleSpec) -> Vec<WeightTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0f64, 1.0).unwrap();
    (0..spec.tensors)
        .map(|t| {
            let mut data = Vec::with_capacity(spec.rows * spec.cols);
            for _ in 0..spec.rows {
                let row_std = spec.std * (0.25 * unit.sample(&mut rng)).exp();
                for _ in 0..spec.cols {
                    data.push((row_std * unit.sample(&mut rng)) as f32);
                }
            }
            WeightTensor::new(format!("layer{t}.weight"), vec![spec.rows, spec.cols], 0, data)
                .expect("generated tensor is valid")
        })
        .collect()
}
