//! Qualitative assessment of a twin model: modal assurance criterion,
//! Pearson correlation, mean absolute error, and the local error field.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Scalar and matrix diagnostics for one prediction against the truth.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Modal assurance criterion matrix of the mode basis.
    pub mac: DMatrix<f64>,
    /// Pearson correlation of the flattened fields.
    pub pearson: f64,
    /// Mean absolute error over all space-time points.
    pub mae: f64,
    /// Pointwise absolute error, same shape as the fields.
    pub local_error: DMatrix<f64>,
}

impl EvalReport {
    pub fn new(
        truth: &DMatrix<f64>,
        prediction: &DMatrix<f64>,
        modes: &DMatrix<f64>,
    ) -> Result<EvalReport> {
        Ok(EvalReport {
            mac: mac_matrix(modes)?,
            pearson: pearson(truth, prediction)?,
            mae: mae(truth, prediction)?,
            local_error: local_error(truth, prediction)?,
        })
    }
}

/// `MAC_ij = <phi_i, phi_j>^2 / (<phi_i,phi_i> <phi_j,phi_j>)`.
///
/// Equals 1 on the diagonal and vanishes off it for an orthogonal basis;
/// invariant under column rescaling.
pub fn mac_matrix(modes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = modes.ncols();
    let mut norms_sq = Vec::with_capacity(k);
    for j in 0..k {
        let sq = modes.column(j).norm_squared();
        if sq == 0.0 {
            return Err(Error::ZeroModeColumn(j));
        }
        norms_sq.push(sq);
    }
    let mut mac = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let dot = modes.column(i).dot(&modes.column(j));
            let value = dot * dot / (norms_sq[i] * norms_sq[j]);
            mac[(i, j)] = value;
            mac[(j, i)] = value;
        }
    }
    Ok(mac)
}

fn check_shapes(truth: &DMatrix<f64>, prediction: &DMatrix<f64>) -> Result<()> {
    if truth.shape() != prediction.shape() {
        return Err(Error::ShapeMismatch(format!(
            "truth is {}x{} but the prediction is {}x{}",
            truth.nrows(),
            truth.ncols(),
            prediction.nrows(),
            prediction.ncols()
        )));
    }
    Ok(())
}

/// Pearson correlation between the two fields, flattened space-major within
/// each time column.
pub fn pearson(truth: &DMatrix<f64>, prediction: &DMatrix<f64>) -> Result<f64> {
    check_shapes(truth, prediction)?;
    let n = (truth.nrows() * truth.ncols()) as f64;
    let mean_t = truth.iter().sum::<f64>() / n;
    let mean_p = prediction.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_t = 0.0;
    let mut var_p = 0.0;
    for (t, p) in truth.iter().zip(prediction.iter()) {
        let dt = t - mean_t;
        let dp = p - mean_p;
        cov += dt * dp;
        var_t += dt * dt;
        var_p += dp * dp;
    }
    if var_t == 0.0 {
        return Err(Error::ZeroVariance("truth"));
    }
    if var_p == 0.0 {
        return Err(Error::ZeroVariance("prediction"));
    }
    Ok(cov / (var_t.sqrt() * var_p.sqrt()))
}

/// Mean absolute error over all space-time points.
pub fn mae(truth: &DMatrix<f64>, prediction: &DMatrix<f64>) -> Result<f64> {
    check_shapes(truth, prediction)?;
    let n = (truth.nrows() * truth.ncols()) as f64;
    Ok(truth.iter().zip(prediction.iter()).map(|(t, p)| (t - p).abs()).sum::<f64>() / n)
}

/// Pointwise absolute error matrix `|truth - prediction|`.
pub fn local_error(truth: &DMatrix<f64>, prediction: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shapes(truth, prediction)?;
    Ok(DMatrix::from_fn(truth.nrows(), truth.ncols(), |r, c| {
        (truth[(r, c)] - prediction[(r, c)]).abs()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_columns_give_the_identity_mac() {
        let mac = mac_matrix(&DMatrix::<f64>::identity(4, 3)).unwrap();
        assert_eq!(mac, DMatrix::identity(3, 3));
    }

    #[test]
    fn parallel_columns_give_unit_mac() {
        let mut modes = DMatrix::zeros(4, 2);
        for i in 0..4 {
            modes[(i, 0)] = (i as f64 + 1.0).sin();
            modes[(i, 1)] = 3.0 * modes[(i, 0)];
        }
        let mac = mac_matrix(&modes).unwrap();
        assert_abs_diff_eq!(mac[(0, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_columns_are_rejected() {
        let modes = DMatrix::<f64>::zeros(4, 2);
        assert!(matches!(mac_matrix(&modes), Err(Error::ZeroModeColumn(0))));
    }

    #[test]
    fn perfect_prediction_correlates_fully() {
        let truth = DMatrix::from_fn(5, 7, |r, c| ((r * c) as f64 * 0.3).sin() + 0.1);
        assert_abs_diff_eq!(pearson(&truth, &truth).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn negated_shifted_prediction_anticorrelates() {
        let truth = DMatrix::from_fn(5, 7, |r, c| ((r + c) as f64 * 0.2).cos());
        let prediction = truth.map(|v| -v + 4.0);
        assert_abs_diff_eq!(pearson(&truth, &prediction).unwrap(), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_fields_have_undefined_correlation() {
        let truth = DMatrix::from_element(3, 3, 2.0);
        let varying = DMatrix::from_fn(3, 3, |r, c| (r + c) as f64);
        assert!(matches!(pearson(&truth, &varying), Err(Error::ZeroVariance("truth"))));
        assert!(matches!(pearson(&varying, &truth), Err(Error::ZeroVariance("prediction"))));
    }

    #[test]
    fn identical_fields_have_zero_errors() {
        let truth = DMatrix::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        assert_eq!(mae(&truth, &truth).unwrap(), 0.0);
        assert_eq!(local_error(&truth, &truth).unwrap(), DMatrix::zeros(4, 4));
    }

    #[test]
    fn constant_offsets_show_up_directly() {
        let truth = DMatrix::from_fn(4, 6, |r, c| (r + c) as f64);
        let prediction = truth.map(|v| v + 0.5);
        assert_abs_diff_eq!(mae(&truth, &prediction).unwrap(), 0.5, epsilon = 1e-15);
        let field = local_error(&truth, &prediction).unwrap();
        assert!(field.iter().all(|&e| (e - 0.5).abs() <= 1e-15));
    }

    #[test]
    fn mae_is_the_mean_of_the_local_error() {
        let truth = DMatrix::from_fn(6, 9, |r, c| ((r as f64) - 0.3 * c as f64).sin());
        let prediction = DMatrix::from_fn(6, 9, |r, c| ((r + c) as f64 * 0.17).cos());
        let field = local_error(&truth, &prediction).unwrap();
        let mean = field.iter().sum::<f64>() / (6.0 * 9.0);
        assert_abs_diff_eq!(mae(&truth, &prediction).unwrap(), mean, epsilon = 1e-12);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let a = DMatrix::<f64>::zeros(3, 4);
        let b = DMatrix::<f64>::zeros(4, 3);
        assert!(matches!(mae(&a, &b), Err(Error::ShapeMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        // MAC is invariant under positive column rescaling and stays in [0, 1].
        #[test]
        fn mac_is_scale_invariant_and_bounded(s1 in 0.1f64..10.0, s2 in 0.1f64..10.0) {
            let modes = DMatrix::from_fn(6, 2, |r, c| ((r * (c + 1)) as f64 * 0.4).sin() + 0.2);
            let mut scaled = modes.clone();
            scaled.column_mut(0).scale_mut(s1);
            scaled.column_mut(1).scale_mut(s2);
            let a = mac_matrix(&modes).unwrap();
            let b = mac_matrix(&scaled).unwrap();
            prop_assert!((a[(0, 1)] - b[(0, 1)]).abs() <= 1e-12);
            for v in a.iter() {
                prop_assert!(*v >= 0.0 && *v <= 1.0 + 1e-12);
            }
            prop_assert!((a[(0,0)] - 1.0).abs() <= 1e-12);
        }

        // Pearson is invariant under positive affine maps, flips sign under negation.
        #[test]
        fn pearson_is_affine_invariant(alpha in 0.1f64..5.0, beta in -3.0f64..3.0) {
            let truth = DMatrix::from_fn(5, 5, |r, c| ((2 * r + c) as f64 * 0.21).sin());
            let pred = DMatrix::from_fn(5, 5, |r, c| ((r + 3 * c) as f64 * 0.13).cos());
            let base = pearson(&truth, &pred).unwrap();
            let scaled = pred.map(|v| alpha * v + beta);
            prop_assert!((pearson(&truth, &scaled).unwrap() - base).abs() <= 1e-12);
            let flipped = pred.map(|v| -alpha * v + beta);
            prop_assert!((pearson(&truth, &flipped).unwrap() + base).abs() <= 1e-12);
        }
    }
}
