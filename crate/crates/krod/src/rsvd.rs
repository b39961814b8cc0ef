//! Rank-k randomized singular value decomposition.
//!
//! The factorization `V0 ~= U Sigma W^T` is obtained by sketching the range of
//! `V0` with a seeded Gaussian test matrix, orthonormalizing the sketch, and
//! taking a dense economy SVD of the small projected matrix:
//!
//! 1. `M` in `R^{n_t x k}` with i.i.d. standard normal entries,
//! 2. `Q = V0 M`,
//! 3. modified Gram-Schmidt with one reorthogonalization pass on `Q`,
//! 4. `P = Q^T V0`,
//! 5. `P = T Sigma W^T` (economy SVD),
//! 6. `U = Q T`.
//!
//! No oversampling or power iterations are applied; accuracy near the
//! numerical rank is therefore seed-dependent, and the seed is carried in the
//! factors. A fixed `(V0, k, seed)` triple reproduces the factors bit for bit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::GaussianStream;

/// Rank-k factors `U Sigma W^T` together with the sketch seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RsvdFactors {
    /// `n_x x k`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Singular values, descending.
    pub sigma: DVector<f64>,
    /// `n_t x k`, orthonormal columns.
    pub w: DMatrix<f64>,
    pub k: usize,
    pub seed: u64,
}

const SKETCH_ATTEMPTS: usize = 3;

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// Returns `None` when a column collapses to exactly zero (a genuinely
/// dependent sketch); tiny residual columns are normalized and later surface
/// as near-zero singular values.
fn orthonormalize(q: &mut DMatrix<f64>) -> Option<()> {
    let k = q.ncols();
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm == 0.0 {
            return None;
        }
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    Some(())
}

/// Computes the rank-k randomized SVD of `v0` from the given seed.
pub fn rsvd(v0: &DMatrix<f64>, k: usize, seed: u64) -> Result<RsvdFactors> {
    let (n_x, n_t) = (v0.nrows(), v0.ncols());
    let max_rank = n_x.min(n_t);
    if k < 2 || k > max_rank {
        return Err(Error::RankOutOfRange { k, max: max_rank, nrows: n_x, ncols: n_t });
    }
    for j in 0..n_t {
        for i in 0..n_x {
            if !v0[(i, j)].is_finite() {
                return Err(Error::NonFiniteMatrix { row: i, col: j });
            }
        }
    }

    // Retries draw fresh Gaussians by continuing the same stream.
    let mut stream = GaussianStream::new(seed);
    let mut q = DMatrix::zeros(n_x, k);
    for attempt in 1..=SKETCH_ATTEMPTS {
        let sketch = DMatrix::from_fn(n_t, k, |_, _| stream.next_normal());
        q = v0 * sketch;
        if orthonormalize(&mut q).is_some() {
            break;
        }
        if attempt == SKETCH_ATTEMPTS {
            return Err(Error::SketchDeficient(SKETCH_ATTEMPTS));
        }
    }

    let projected = q.transpose() * v0;
    let svd = projected.svd(true, true);
    let t = svd.u.expect("u requested");
    let w_t = svd.v_t.expect("v_t requested");

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let sigma = DVector::from_fn(k, |i, _| svd.singular_values[order[i]]);
    let t_sorted = DMatrix::from_fn(k, k, |r, c| t[(r, order[c])]);
    let w = DMatrix::from_fn(n_t, k, |r, c| w_t[(order[c], r)]);
    let u = q * t_sorted;

    Ok(RsvdFactors { u, sigma, w, k, seed })
}

impl RsvdFactors {
    /// `U Sigma W^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col.scale_mut(self.sigma[j]);
        }
        scaled * self.w.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn frobenius_orthonormality_defect(m: &DMatrix<f64>) -> f64 {
        let gram = m.transpose() * m;
        (&gram - DMatrix::identity(gram.nrows(), gram.ncols())).norm()
    }

    fn random_exact_rank(n_x: usize, n_t: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut g = GaussianStream::new(seed);
        let a = DMatrix::from_fn(n_x, r, |_, _| g.next_normal());
        let b = DMatrix::from_fn(r, n_t, |_, _| g.next_normal());
        a * b
    }

    #[test]
    fn rank_one_outer_product() {
        let u = DVector::from_fn(12, |i, _| 0.3 + (i as f64 * 0.7).sin());
        let v = DVector::from_fn(9, |i, _| 1.0 - 0.1 * i as f64);
        let v0 = &u * v.transpose();
        let f = rsvd(&v0, 2, 5).unwrap();
        assert_abs_diff_eq!(f.sigma[0], u.norm() * v.norm(), epsilon = 1e-12 * f.sigma[0]);
        assert!(f.sigma[1] <= 1e-10 * f.sigma[0]);
    }

    #[test]
    fn embedded_diagonal_recovers_exact_spectrum() {
        let mut v0 = DMatrix::zeros(10, 10);
        v0[(0, 0)] = 3.0;
        v0[(1, 1)] = 2.0;
        v0[(2, 2)] = 1.0;
        let f = rsvd(&v0, 3, 11).unwrap();
        for (i, expected) in [3.0, 2.0, 1.0].into_iter().enumerate() {
            assert_abs_diff_eq!(f.sigma[i], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn exact_rank_matrix_matches_full_svd_oracle() {
        let v0 = random_exact_rank(50, 30, 5, 99);
        let f = rsvd(&v0, 5, 123).unwrap();
        let oracle = v0.clone().svd(false, false);
        let mut reference: Vec<f64> = oracle.singular_values.iter().copied().collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        for i in 0..5 {
            assert_abs_diff_eq!(f.sigma[i], reference[i], epsilon = 1e-8 * reference[0]);
        }
        let err = (&v0 - f.reconstruct()).norm() / v0.norm();
        assert!(err <= 1e-8, "reconstruction error {err}");
    }

    #[test]
    fn factors_are_deterministic_for_a_fixed_seed() {
        let v0 = random_exact_rank(24, 18, 6, 4);
        let a = rsvd(&v0, 8, 77).unwrap();
        let b = rsvd(&v0, 8, 77).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.sigma, b.sigma);
        assert_eq!(a.w, b.w);
    }

    #[test]
    fn projector_is_seed_invariant_at_exact_rank() {
        let v0 = random_exact_rank(40, 25, 5, 2);
        let a = rsvd(&v0, 5, 101).unwrap();
        let b = rsvd(&v0, 5, 202).unwrap();
        let pa = &a.u * a.u.transpose();
        let pb = &b.u * b.u.transpose();
        assert!((pa - pb).norm() <= 1e-8);
    }

    #[test]
    fn rejects_bad_ranks_and_nonfinite_input() {
        let v0 = DMatrix::from_element(6, 4, 1.0);
        assert!(matches!(rsvd(&v0, 1, 0), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(rsvd(&v0, 5, 0), Err(Error::RankOutOfRange { .. })));
        let mut bad = v0.clone();
        bad[(2, 1)] = f64::NAN;
        assert!(matches!(rsvd(&bad, 2, 0), Err(Error::NonFiniteMatrix { row: 2, col: 1 })));
    }

    #[test]
    fn zero_matrix_reports_a_deficient_sketch() {
        let v0 = DMatrix::zeros(8, 6);
        assert!(matches!(rsvd(&v0, 2, 9), Err(Error::SketchDeficient(3))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn factors_are_orthonormal(seed in 0u64..1000, n_x in 6usize..30, n_t in 6usize..30, r in 2usize..6) {
            let r = r.min(n_x.min(n_t) - 1).max(2);
            let v0 = random_exact_rank(n_x, n_t, r + 1, seed.wrapping_add(1));
            let k = r.min(n_x.min(n_t));
            let f = rsvd(&v0, k, seed).unwrap();
            prop_assert!(frobenius_orthonormality_defect(&f.u) <= 1e-10);
            prop_assert!(frobenius_orthonormality_defect(&f.w) <= 1e-10);
            for i in 1..k {
                prop_assert!(f.sigma[i] <= f.sigma[i - 1]);
                prop_assert!(f.sigma[i] >= 0.0);
            }
        }
    }
}
