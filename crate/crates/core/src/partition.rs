//! Magnitude-based outlier selection.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{config_err, Result};
use crate::math::round_even;
use crate::tensor::WeightTensor;

/// Outlier set of one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMask {
    pub tensor_name: String,
    /// Smallest selected magnitude; `+inf` when nothing is selected.
    pub tau: f32,
    /// Flat indices of the outliers, strictly increasing.
    pub outlier_indices: Vec<usize>,
    pub rho: f64,
}

impl PartitionMask {
    /// Per-element membership flags for a tensor of `len` elements.
    pub fn outlier_flags(&self, len: usize) -> Vec<bool> {
        let mut flags = alloc::vec![false; len];
        for &i in &self.outlier_indices {
            flags[i] = true;
        }
        flags
    }

    /// Complement of the outlier set, ascending.
    pub fn inlier_indices(&self, len: usize) -> Vec<usize> {
        let flags = self.outlier_flags(len);
        (0..len).filter(|&i| !flags[i]).collect()
    }
}

/// Number of outliers for ratio `rho` over `n` elements: `rho * n` rounded half to even.
pub fn outlier_count(rho: f64, n: usize) -> usize {
    let k = round_even(rho * n as f64);
    (k.max(0.0) as usize).min(n)
}

/// Selects the `round(rho * N)` largest-magnitude weights.
///
/// Magnitude ties are resolved in favour of the smaller flat index, so the
/// selection is a prefix of one fixed total order and grows monotonically
/// with `rho`.
pub fn select_outliers(tensor: &WeightTensor, rho: f64) -> Result<PartitionMask> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(config_err!("outlier ratio {} outside [0, 1]", rho));
    }
    let n = tensor.len();
    if n == 0 {
        return Err(config_err!("tensor '{}' is empty", tensor.name));
    }
    let k = outlier_count(rho, n);
    let data = &tensor.data;
    let mut order: Vec<usize> = (0..n).collect();
    let by_rank = |&a: &usize, &b: &usize| {
        data[b]
            .abs()
            .total_cmp(&data[a].abs())
            .then_with(|| a.cmp(&b))
    };
    if k > 0 && k < n {
        order.select_nth_unstable_by(k - 1, by_rank);
    }
    let mut selected: Vec<usize> = order[..k].to_vec();
    let tau = selected
        .iter()
        .map(|&i| data[i].abs())
        .fold(f32::INFINITY, f32::min);
    selected.sort_unstable();
    Ok(PartitionMask {
        tensor_name: tensor.name.clone(),
        tau,
        outlier_indices: selected,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn t(data: Vec<f32>) -> WeightTensor {
        let n = data.len();
        WeightTensor::new("t", vec![n], 0, data).unwrap()
    }

    #[test]
    fn picks_largest_magnitude() {
        let m = select_outliers(&t(vec![0.1, -0.5, 0.3, 2.0]), 0.25).unwrap();
        assert_eq!(m.outlier_indices, vec![3]);
        assert_eq!(m.tau, 2.0);

        let m = select_outliers(&t(vec![0.1, -0.5, 0.3, 2.0]), 0.5).unwrap();
        assert_eq!(m.outlier_indices, vec![1, 3]);
        assert_eq!(m.tau, 0.5);
    }

    #[test]
    fn rho_zero_and_one() {
        let m = select_outliers(&t(vec![1.0, -2.0, 3.0]), 0.0).unwrap();
        assert!(m.outlier_indices.is_empty());
        assert_eq!(m.tau, f32::INFINITY);
        let m = select_outliers(&t(vec![1.0, -2.0, 3.0]), 1.0).unwrap();
        assert_eq!(m.outlier_indices, vec![0, 1, 2]);
        assert_eq!(m.tau, 1.0);
    }

    #[test]
    fn rejects_ratio_outside_unit_interval() {
        assert!(select_outliers(&t(vec![1.0]), -0.1).is_err());
        assert!(select_outliers(&t(vec![1.0]), 1.5).is_err());
        assert!(select_outliers(&t(vec![1.0]), f64::NAN).is_err());
    }

    #[test]
    fn ties_prefer_smaller_index() {
        let m = select_outliers(&t(vec![1.0, -1.0, 1.0, 0.5]), 0.5).unwrap();
        assert_eq!(m.outlier_indices, vec![0, 1]);
    }

    #[test]
    fn count_rounds_half_to_even() {
        assert_eq!(outlier_count(0.25, 2), 0); // 0.5 -> 0
        assert_eq!(outlier_count(0.75, 2), 2); // 1.5 -> 2
        assert_eq!(outlier_count(0.5, 5), 2); // 2.5 -> 2
        assert_eq!(outlier_count(0.3, 10), 3);
        assert_eq!(outlier_count(1.0, 7), 7);
    }

    /// Sort-by-magnitude oracle: full stable sort, independent of the
    /// selection path used above.
    fn oracle(data: &[f32], rho: f64) -> Vec<usize> {
        let k = outlier_count(rho, data.len());
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.sort_by(|&a, &b| data[b].abs().partial_cmp(&data[a].abs()).unwrap());
        let mut sel = idx[..k].to_vec();
        sel.sort();
        sel
    }

    proptest! {
        #[test]
        fn matches_sort_oracle(data in proptest::collection::vec(-100i32..100, 1..200), rho in 0.0f64..=1.0) {
            let data: Vec<f32> = data.into_iter().map(|v| v as f32 / 8.0).collect();
            let m = select_outliers(&t(data.clone()), rho).unwrap();
            prop_assert_eq!(&m.outlier_indices, &oracle(&data, rho));
            let inl = m.inlier_indices(data.len());
            prop_assert_eq!(inl.len() + m.outlier_indices.len(), data.len());
            for &i in &inl {
                prop_assert!(data[i].abs() <= m.tau);
            }
        }

        #[test]
        fn nested_in_rho(data in proptest::collection::vec(-20i32..20, 1..120), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let data: Vec<f32> = data.into_iter().map(|v| v as f32).collect();
            let small = select_outliers(&t(data.clone()), lo).unwrap();
            let large = select_outliers(&t(data), hi).unwrap();
            for i in &small.outlier_indices {
                prop_assert!(large.outlier_indices.binary_search(i).is_ok());
            }
        }

        #[test]
        fn invariant_under_exact_positive_scaling(data in proptest::collection::vec(-1.0e3f32..1.0e3, 1..120), rho in 0.0f64..=1.0, e in -8i32..8) {
            let c = libm::exp2f(e as f32);
            let scaled: Vec<f32> = data.iter().map(|v| v * c).collect();
            let a = select_outliers(&t(data), rho).unwrap();
            let b = select_outliers(&t(scaled), rho).unwrap();
            prop_assert_eq!(a.outlier_indices, b.outlier_indices);
        }
    }
}
