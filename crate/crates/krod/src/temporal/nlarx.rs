//! Nonlinear autoregressive models with exogenous input (NLARX).
//!
//! One model predicts a single temporal coefficient from its own lagged
//! values. The regressor vector at step `t` holds `na` past outputs and `nb`
//! past inputs delayed by `nk`:
//!
//! ```text
//!   r(t) = [a(t-1) ... a(t-na), a(t-nk) ... a(t-nk-nb+1)]
//! ```
//!
//! The network is the smallest cascade shape with a linear and a nonlinear
//! component, summed at the output:
//!
//! ```text
//!   y(t) = w_lin . r + b_lin + v . tanh(W r + b)
//! ```
//!
//! All channels are affinely normalized by training-prefix statistics before
//! entering the network, and the prediction is mapped back afterwards.
//!
//! Training minimizes the mean squared one-step residual over the training
//! prefix with a Levenberg-Marquardt iteration on the analytic residual
//! Jacobian. The linear block is initialized to the ordinary least-squares
//! solution and the nonlinear output weights start at zero, so the first
//! iterate is already the best linear model and accepted steps only improve
//! it. Accepted losses are recorded; the sequence is non-increasing by
//! construction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::GaussianStream;

/// Lag structure of one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlarxOrders {
    /// Number of past output terms.
    pub na: usize,
    /// Number of past input terms.
    pub nb: usize,
    /// Input delay.
    pub nk: usize,
}

impl NlarxOrders {
    pub fn validate(&self) -> Result<()> {
        if self.nb == 0 {
            return Err(Error::Config("nb must be positive".into()));
        }
        if self.na + self.nb == 0 {
            return Err(Error::Config("na + nb must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of regressor channels.
    pub fn regressors(&self) -> usize {
        self.na + self.nb
    }

    /// First step with a complete lag window.
    pub fn min_start(&self) -> usize {
        self.na.max(self.nk + self.nb.saturating_sub(1))
    }
}

/// Affine channel normalizer `v -> (v - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub shift: f64,
    pub scale: f64,
}

impl Scaler {
    /// Mean/std normalizer from samples; degenerate spreads fall back to
    /// unit scale so constant series stay representable.
    pub fn fit(samples: &[f64]) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let scale = if std > 1e-300 { std } else { 1.0 };
        Scaler { shift: mean, scale }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.shift) / self.scale
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.scale + self.shift
    }
}

/// A trained surrogate for one temporal coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlarxModel {
    pub orders: NlarxOrders,
    pub hidden_width: usize,
    /// Flat parameter vector: `[w_lin (r), b_lin, W (h x r, row-major), b (h), v (h)]`.
    pub theta: Vec<f64>,
    /// Normalizers for the regressor channels.
    pub input_scaling: Vec<Scaler>,
    /// Normalizer for the predicted channel.
    pub target_scaling: Scaler,
    /// Reported training objective: `(1/2m) sum |a - a_hat|` over the
    /// training rows, in original units.
    pub train_loss: f64,
    /// Number of training-prefix samples the model was fitted on.
    pub train_len: usize,
}

/// Simulation mode for a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulationMode {
    /// Past outputs come from the measured series.
    OneStep,
    /// Past outputs are fed back from the model's own predictions after the
    /// priming window; measured inputs are consumed while available and the
    /// last one is held afterwards.
    FreeRun,
}

pub(crate) fn theta_len(r: usize, h: usize) -> usize {
    r + 1 + h * r + h + h
}

/// Network output and, optionally, the gradient row `d y / d theta`.
fn forward(
    theta: &[f64],
    r: usize,
    h: usize,
    regressors: &[f64],
    mut grad_row: Option<&mut [f64]>,
) -> f64 {
    let (w_lin, rest) = theta.split_at(r);
    let (b_lin, rest) = rest.split_at(1);
    let (w_hid, rest) = rest.split_at(h * r);
    let (b_hid, v_out) = rest.split_at(h);

    let mut y = b_lin[0];
    for c in 0..r {
        y += w_lin[c] * regressors[c];
    }
    if let Some(row) = grad_row.as_deref_mut() {
        row[..r].copy_from_slice(regressors);
        row[r] = 1.0;
    }
    for j in 0..h {
        let mut pre = b_hid[j];
        let row_off = j * r;
        for c in 0..r {
            pre += w_hid[row_off + c] * regressors[c];
        }
        let th = pre.tanh();
        y += v_out[j] * th;
        if let Some(row) = grad_row.as_deref_mut() {
            let sech2 = 1.0 - th * th;
            let base = r + 1;
            for c in 0..r {
                row[base + row_off + c] = v_out[j] * sech2 * regressors[c];
            }
            row[base + h * r + j] = v_out[j] * sech2;
            row[base + h * r + h + j] = th;
        }
    }
    y
}

/// Half mean squared error and its analytic gradient on a normalized
/// regression dataset. Exposed for optimizer diagnostics; the same Jacobian
/// drives training.
pub fn loss_and_gradient(
    hidden_width: usize,
    theta: &[f64],
    regressors: &DMatrix<f64>,
    targets: &DVector<f64>,
) -> (f64, Vec<f64>) {
    let (m, r) = (regressors.nrows(), regressors.ncols());
    assert_eq!(theta.len(), theta_len(r, hidden_width));
    let mut grad = vec![0.0; theta.len()];
    let mut row = vec![0.0; theta.len()];
    let mut loss = 0.0;
    let mut inputs = vec![0.0; r];
    for i in 0..m {
        for c in 0..r {
            inputs[c] = regressors[(i, c)];
        }
        let y = forward(theta, r, hidden_width, &inputs, Some(&mut row));
        let e = y - targets[i];
        loss += e * e;
        for (g, &dr) in grad.iter_mut().zip(&row) {
            *g += e * dr;
        }
    }
    let scale = 1.0 / m as f64;
    for g in &mut grad {
        *g *= scale;
    }
    (0.5 * loss * scale, grad)
}

pub(crate) struct TrainOutcome {
    pub theta: Vec<f64>,
    /// Accepted normalized MSE values, non-increasing.
    pub checkpoints: Vec<f64>,
}

/// Levenberg-Marquardt on the normalized one-step dataset.
pub(crate) fn train_weights(
    hidden_width: usize,
    regressors: &DMatrix<f64>,
    targets: &DVector<f64>,
    max_iters: usize,
    seed: u64,
) -> Result<TrainOutcome> {
    let (m, r) = (regressors.nrows(), regressors.ncols());
    let h = hidden_width;
    let p = theta_len(r, h);

    let mut theta = vec![0.0; p];
    let mut g = GaussianStream::new(seed);
    let spread = 1.0 / (r.max(1) as f64).sqrt();
    for w in &mut theta[r + 1..r + 1 + h * r] {
        *w = spread * g.next_normal();
    }
    for b in &mut theta[r + 1 + h * r..r + 1 + h * r + h] {
        *b = 0.1 * g.next_normal();
    }
    // linear bypass starts at the least-squares solution; v = 0 makes the
    // initial model exactly linear
    let mut design = DMatrix::zeros(m, r + 1);
    design.columns_mut(0, r).copy_from(regressors);
    design.column_mut(r).fill(1.0);
    let beta = design
        .svd(true, true)
        .solve(&DMatrix::from_column_slice(m, 1, targets.as_slice()), 1e-12)
        .map_err(|_| Error::NonFiniteLoss(0))?;
    for c in 0..r {
        theta[c] = beta[(c, 0)];
    }
    theta[r] = beta[(r, 0)];

    let mse = |th: &[f64]| -> f64 {
        let mut acc = 0.0;
        let mut inputs = vec![0.0; r];
        for i in 0..m {
            for c in 0..r {
                inputs[c] = regressors[(i, c)];
            }
            let e = forward(th, r, h, &inputs, None) - targets[i];
            acc += e * e;
        }
        acc / m as f64
    };

    let mut best = theta.clone();
    let mut best_mse = mse(&theta);
    if !best_mse.is_finite() {
        return Err(Error::NonFiniteLoss(0));
    }
    let mut checkpoints = vec![best_mse];

    let mut lambda = 1e-3;
    let mut jac = DMatrix::zeros(m, p);
    let mut residual = DVector::zeros(m);
    let mut inputs = vec![0.0; r];
    let mut row = vec![0.0; p];
    let mut stalled = 0usize;
    let mut worse_checks = 0usize;

    for iter in 0..max_iters {
        for i in 0..m {
            for c in 0..r {
                inputs[c] = regressors[(i, c)];
            }
            let y = forward(&best, r, h, &inputs, Some(&mut row));
            residual[i] = y - targets[i];
            for c in 0..p {
                jac[(i, c)] = row[c];
            }
        }
        let jtj = jac.transpose() * &jac;
        let jte = jac.transpose() * &residual;

        let mut accepted = false;
        while lambda <= 1e14 {
            let mut damped = jtj.clone();
            for d in 0..p {
                damped[(d, d)] += lambda * (jtj[(d, d)] + 1e-12);
            }
            let step = match damped.cholesky() {
                Some(chol) => chol.solve(&jte),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let candidate: Vec<f64> =
                best.iter().zip(step.iter()).map(|(t, s)| t - s).collect();
            let cand_mse = mse(&candidate);
            if cand_mse.is_finite() && cand_mse < best_mse {
                let gain = best_mse - cand_mse;
                best = candidate;
                best_mse = cand_mse;
                checkpoints.push(best_mse);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                worse_checks = 0;
                if gain <= 1e-14 * best_mse.max(1e-30) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                break;
            }
            if !cand_mse.is_finite() {
                worse_checks += 1;
                if worse_checks >= 10 {
                    return Err(Error::NonFiniteLoss(iter));
                }
            }
            lambda *= 4.0;
        }
        if !accepted || stalled >= 3 || best_mse < 1e-28 {
            break;
        }
    }

    Ok(TrainOutcome { theta: best, checkpoints })
}

impl NlarxModel {
    /// First step index with a complete lag window.
    pub fn min_start(&self) -> usize {
        self.orders.min_start()
    }

    /// Predicts the next value from raw (unnormalized) lag values laid out
    /// like the regressor vector.
    pub fn predict(&self, raw_regressors: &[f64]) -> f64 {
        let r = self.orders.regressors();
        debug_assert_eq!(raw_regressors.len(), r);
        let normalized: Vec<f64> = raw_regressors
            .iter()
            .zip(&self.input_scaling)
            .map(|(&v, s)| s.apply(v))
            .collect();
        let y = forward(&self.theta, r, self.hidden_width, &normalized, None);
        self.target_scaling.invert(y)
    }

    /// Gathers raw regressors at step `t`, reading past outputs from
    /// `outputs` and past inputs from `inputs` (clamped to its last value
    /// once exhausted).
    fn gather(&self, t: usize, outputs: &[f64], inputs: &[f64]) -> Vec<f64> {
        let mut raw = Vec::with_capacity(self.orders.regressors());
        for lag in 1..=self.orders.na {
            raw.push(outputs[t - lag]);
        }
        for j in 0..self.orders.nb {
            let idx = t - self.orders.nk - j;
            raw.push(if idx < inputs.len() { inputs[idx] } else { *inputs.last().expect("nonempty inputs") });
        }
        raw
    }
}

/// Simulates a fitted model for `horizon` steps.
///
/// The first `min_start` entries are primed from the measured series. In
/// one-step mode every regressor reads the measured series, so the horizon
/// may not exceed its length; in free-run mode predictions are fed back and
/// the exogenous input is held at its last measured value once the horizon
/// passes the series end.
pub fn simulate_nlarx(
    model: &NlarxModel,
    exogenous: &[f64],
    horizon: usize,
    mode: SimulationMode,
) -> Result<Vec<f64>> {
    let start = model.min_start();
    if horizon == 0 || exogenous.is_empty() || exogenous.len() < start.max(1) {
        return Err(Error::SeriesTooShort {
            len: exogenous.len(),
            required: start.max(1),
        });
    }
    if mode == SimulationMode::OneStep && horizon > exogenous.len() {
        return Err(Error::HorizonExceedsData { horizon, available: exogenous.len() });
    }
    let mut out = vec![0.0; horizon];
    let primed = start.min(horizon);
    out[..primed].copy_from_slice(&exogenous[..primed]);
    for t in start..horizon {
        let raw = match mode {
            SimulationMode::OneStep => model.gather(t, exogenous, exogenous),
            SimulationMode::FreeRun => model.gather(t, &out, exogenous),
        };
        out[t] = model.predict(&raw);
    }
    Ok(out)
}

/// Builds the normalized one-step regression dataset over `series[..limit]`.
pub(crate) fn build_dataset(
    series: &[f64],
    orders: NlarxOrders,
    limit: usize,
    input_scaling: &[Scaler],
    target_scaling: Scaler,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let start = orders.min_start();
    if limit <= start {
        return Err(Error::SeriesTooShort { len: limit, required: start + 1 });
    }
    let m = limit - start;
    let r = orders.regressors();
    let mut regs = DMatrix::zeros(m, r);
    let mut targets = DVector::zeros(m);
    for (row, t) in (start..limit).enumerate() {
        for lag in 1..=orders.na {
            regs[(row, lag - 1)] = input_scaling[lag - 1].apply(series[t - lag]);
        }
        for j in 0..orders.nb {
            regs[(row, orders.na + j)] =
                input_scaling[orders.na + j].apply(series[t - orders.nk - j]);
        }
        targets[row] = target_scaling.apply(series[t]);
    }
    Ok((regs, targets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn min_start_covers_all_lags() {
        assert_eq!(NlarxOrders { na: 2, nb: 1, nk: 0 }.min_start(), 2);
        assert_eq!(NlarxOrders { na: 1, nb: 3, nk: 1 }.min_start(), 3);
        assert_eq!(NlarxOrders { na: 0, nb: 2, nk: 2 }.min_start(), 3);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let orders = NlarxOrders { na: 2, nb: 2, nk: 1 };
        let r = orders.regressors();
        let h = 4;
        let mut g = GaussianStream::new(7);
        let theta: Vec<f64> = (0..theta_len(r, h)).map(|_| 0.5 * g.next_normal()).collect();
        let regs = DMatrix::from_fn(25, r, |_, _| g.next_normal());
        let targets = DVector::from_fn(25, |_, _| g.next_normal());

        let (_, grad) = loss_and_gradient(h, &theta, &regs, &targets);
        let mut probe = GaussianStream::new(99);
        for _ in 0..20 {
            let c = (probe.next_uniform() * theta.len() as f64) as usize;
            let step = 1e-6 * theta[c].abs().max(1.0);
            let mut plus = theta.clone();
            plus[c] += step;
            let mut minus = theta.clone();
            minus[c] -= step;
            let (lp, _) = loss_and_gradient(h, &plus, &regs, &targets);
            let (lm, _) = loss_and_gradient(h, &minus, &regs, &targets);
            let fd = (lp - lm) / (2.0 * step);
            let rel = (grad[c] - fd).abs() / grad[c].abs().max(fd.abs()).max(1e-12);
            assert!(rel <= 1e-5, "component {c}: analytic {} vs fd {fd}", grad[c]);
        }
    }

    #[test]
    fn checkpoints_never_increase() {
        let mut g = GaussianStream::new(3);
        let regs = DMatrix::from_fn(60, 3, |_, _| g.next_normal());
        let targets =
            DVector::from_fn(60, |i, _| (regs[(i, 0)] * 1.2 - regs[(i, 2)]).tanh() * 0.7);
        let outcome = train_weights(6, &regs, &targets, 120, 5).unwrap();
        for pair in outcome.checkpoints.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn scaler_handles_constant_samples() {
        let s = Scaler::fit(&[4.0, 4.0, 4.0]);
        assert_eq!(s.apply(4.0), 0.0);
        assert_eq!(s.invert(0.0), 4.0);
    }

    proptest! {
        #[test]
        fn scaling_round_trips(v in -1e6f64..1e6, mean in -10.0f64..10.0, spread in 0.01f64..100.0) {
            let s = Scaler { shift: mean, scale: spread };
            prop_assert!((s.invert(s.apply(v)) - v).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }
}
