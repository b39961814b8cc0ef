//! Koopman randomized orthogonal decomposition (KROD), offline phase.
//!
//! From the time-shifted snapshot pair `(V0, V1)` and a target rank `k`, the
//! decomposition computes an orthonormal spatial basis of Koopman modes and
//! their modal amplitudes:
//!
//! 1. rank-k randomized SVD `V0 ~= U Sigma W^T`,
//! 2. reduced propagator `S = U^T (V1 W Sigma^{-1})`,
//! 3. Gram matrix `G = S^T S` (real symmetric positive semi-definite for real
//!    snapshots),
//! 4. eigendecomposition `G X = X Lambda` with orthonormal `X`,
//! 5. modes `Phi = U X`, columns normalized, amplitudes `A = Phi^T V0`.
//!
//! Eigenpairs are ordered by descending `Lambda`, and each mode column is
//! sign-fixed so its largest-magnitude entry is positive, making outputs
//! comparable across runs. `Sigma^{-1}` is guarded: ranks where
//! `sigma_k <= 1e-12 sigma_1` are rejected so noise is never amplified
//! through the inverse.

use nalgebra::{DMatrix, DVector};

use crate::burgers::SnapshotSet;
use crate::error::{Error, Result};
use crate::rsvd::rsvd;

/// Relative floor on the smallest retained singular value.
pub const SIGMA_RATIO_FLOOR: f64 = 1e-12;

/// Which data matrix the modal amplitudes project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeSource {
    /// `A = Phi^T V0` (the default projection).
    #[default]
    Unshifted,
    /// `A = Phi^T V1`, kept for study of the shifted variant.
    Shifted,
}

/// Orthonormal Koopman modes with their modal amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanTriplet {
    /// `n_x x k` modes, orthonormal columns.
    pub modes: DMatrix<f64>,
    /// `k x n_t` amplitudes; row `j` is `a_j(t_i)`.
    pub amplitudes: DMatrix<f64>,
    pub rank: usize,
    /// Gram spectrum, descending, clipped at zero.
    pub eigvals: DVector<f64>,
    pub seed: u64,
}

/// Splits a snapshot set into the unshifted/shifted pair `(V0, V1)`.
pub fn split_snapshots(set: &SnapshotSet) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let cols = set.values.ncols();
    if cols < 2 {
        return Err(Error::TooFewSnapshots(cols));
    }
    let v0 = set.values.columns(0, cols - 1).clone_owned();
    let v1 = set.values.columns(1, cols - 1).clone_owned();
    Ok((v0, v1))
}

/// Runs the offline decomposition at rank `k` with the default amplitude
/// projection.
pub fn krod_offline(
    v0: &DMatrix<f64>,
    v1: &DMatrix<f64>,
    k: usize,
    seed: u64,
) -> Result<KoopmanTriplet> {
    krod_offline_with(v0, v1, k, seed, AmplitudeSource::Unshifted)
}

pub fn krod_offline_with(
    v0: &DMatrix<f64>,
    v1: &DMatrix<f64>,
    k: usize,
    seed: u64,
    amplitudes_from: AmplitudeSource,
) -> Result<KoopmanTriplet> {
    if v0.shape() != v1.shape() {
        return Err(Error::ShapeMismatch(format!(
            "V0 is {}x{} but V1 is {}x{}",
            v0.nrows(),
            v0.ncols(),
            v1.nrows(),
            v1.ncols()
        )));
    }
    let factors = rsvd(v0, k, seed)?;
    let ratio = factors.sigma[k - 1] / factors.sigma[0];
    if !(ratio > SIGMA_RATIO_FLOOR) {
        return Err(Error::SigmaThreshold { k, ratio });
    }

    // S = U^T (V1 W Sigma^{-1})
    let mut w_scaled = factors.w.clone();
    for (j, mut col) in w_scaled.column_iter_mut().enumerate() {
        col.scale_mut(1.0 / factors.sigma[j]);
    }
    let s = factors.u.transpose() * (v1 * w_scaled);
    let gram = s.transpose() * &s;

    let eigen = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

    let eigvals = DVector::from_fn(k, |i, _| eigen.eigenvalues[order[i]].max(0.0));
    let x = DMatrix::from_fn(k, k, |r, c| eigen.eigenvectors[(r, order[c])]);

    let mut modes = factors.u * x;
    for mut col in modes.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col.scale_mut(1.0 / norm);
        }
        // sign convention: largest-magnitude entry positive
        let mut lead = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.neg_mut();
        }
    }

    let amplitudes = match amplitudes_from {
        AmplitudeSource::Unshifted => modes.transpose() * v0,
        AmplitudeSource::Shifted => modes.transpose() * v1,
    };

    Ok(KoopmanTriplet { modes, amplitudes, rank: k, eigvals, seed })
}

/// Reduced-order reconstruction `Phi A`, i.e. `u(x, t_i) = sum_j a_j(t_i) phi_j(x)`.
pub fn reconstruct(triplet: &KoopmanTriplet) -> DMatrix<f64> {
    &triplet.modes * &triplet.amplitudes
}
