//! Online phase: per-coefficient NLARX surrogates, twin assembly, two-fold
//! validation, and field prediction.
//!
//! Each temporal coefficient from the offline decomposition gets its own
//! surrogate, fitted over a grid of lag orders: every candidate is trained on
//! the prefix of the series and ranked by its one-step error on the held-out
//! suffix, and the best orders win. The assembled twin couples the selected
//! mode basis with the surrogates and an initial coefficient vector obtained
//! by projecting the first snapshot onto the modes.

pub mod nlarx;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use nlarx::{
    loss_and_gradient, simulate_nlarx, NlarxModel, NlarxOrders, Scaler, SimulationMode,
};

use crate::decomposition::KoopmanTriplet;
use crate::error::{Error, Result};
use crate::rng::child_seed;

/// Search space and budget for surrogate fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub na_grid: Vec<usize>,
    pub nb_grid: Vec<usize>,
    pub nk_grid: Vec<usize>,
    pub hidden_width: usize,
    /// Fraction of the series used for training; the remainder validates.
    pub train_fraction: f64,
    /// Optimizer iteration budget per candidate.
    pub max_iters: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            na_grid: vec![1, 2, 3],
            nb_grid: vec![1, 2, 3],
            nk_grid: vec![0, 1],
            hidden_width: 8,
            train_fraction: 2.0 / 3.0,
            max_iters: 150,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.na_grid.is_empty() || self.nb_grid.is_empty() || self.nk_grid.is_empty() {
            return Err(Error::Config("order grids must be nonempty".into()));
        }
        if self.nb_grid.iter().any(|&nb| nb == 0) {
            return Err(Error::Config("nb must be positive".into()));
        }
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1] (got {})",
                self.train_fraction
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }

    fn order_grid(&self) -> Vec<NlarxOrders> {
        let mut grid = Vec::new();
        for &na in &self.na_grid {
            for &nb in &self.nb_grid {
                for &nk in &self.nk_grid {
                    grid.push(NlarxOrders { na, nb, nk });
                }
            }
        }
        grid
    }

    fn with_fraction(&self, train_fraction: f64) -> FitConfig {
        FitConfig { train_fraction, ..self.clone() }
    }
}

/// The assembled reduced-order twin.
#[derive(Debug, Clone)]
pub struct TwinModel {
    pub triplet: KoopmanTriplet,
    /// Projected initial coefficients `a0_j = <u0, phi_j>`.
    pub a0: DVector<f64>,
    /// One surrogate per retained mode.
    pub surrogates: Vec<NlarxModel>,
    /// Sampling step of the training grid.
    pub dt: f64,
    /// Time of the first snapshot.
    pub t0: f64,
}

/// Projects the initial state onto the mode basis: `Phi^T u0`.
pub fn initial_coefficients(u0: &DVector<f64>, modes: &DMatrix<f64>) -> Result<DVector<f64>> {
    if u0.len() != modes.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "state has {} entries but modes have {} rows",
            u0.len(),
            modes.nrows()
        )));
    }
    Ok(modes.transpose() * u0)
}

/// One-step validation RMSE of `model` on `series[n_train..]`.
fn validation_rmse(model: &NlarxModel, series: &[f64], n_train: usize) -> Result<f64> {
    let predictions = simulate_nlarx(model, series, series.len(), SimulationMode::OneStep)?;
    let range = n_train.max(model.min_start())..series.len();
    if range.is_empty() {
        return Ok(f64::INFINITY);
    }
    let mut acc = 0.0;
    for t in range.clone() {
        let e = predictions[t] - series[t];
        acc += e * e;
    }
    Ok((acc / range.len() as f64).sqrt())
}

/// Fits one surrogate: trains every order candidate on the training prefix
/// and keeps the one with the lowest one-step validation error on the
/// held-out suffix (training error breaks in when the whole series trains).
pub fn fit_nlarx(series: &[f64], config: &FitConfig, seed: u64) -> Result<NlarxModel> {
    config.validate()?;
    let n = series.len();
    let grid = config.order_grid();
    let max_start = grid.iter().map(|o| o.min_start()).max().unwrap_or(1);
    if n <= max_start + 1 {
        return Err(Error::SeriesTooShort { len: n, required: max_start + 2 });
    }
    let n_train = ((config.train_fraction * n as f64).floor() as usize).clamp(1, n);
    if n_train <= max_start {
        return Err(Error::SeriesTooShort { len: n_train, required: max_start + 1 });
    }
    if config.train_fraction < 1.0 && n - n_train < 10 {
        return Err(Error::Config(format!(
            "train_fraction {} leaves only {} validation samples (need >= 10)",
            config.train_fraction,
            n - n_train
        )));
    }

    let scaler = Scaler::fit(&series[..n_train]);
    let mut best: Option<(f64, NlarxModel)> = None;
    for (idx, orders) in grid.into_iter().enumerate() {
        orders.validate()?;
        let r = orders.regressors();
        let input_scaling = vec![scaler; r];
        let (regs, targets) =
            nlarx::build_dataset(series, orders, n_train, &input_scaling, scaler)?;
        let outcome = nlarx::train_weights(
            config.hidden_width,
            &regs,
            &targets,
            config.max_iters,
            child_seed(seed, "nlarx-init", idx as u64),
        )?;
        let mut model = NlarxModel {
            orders,
            hidden_width: config.hidden_width,
            theta: outcome.theta,
            input_scaling,
            target_scaling: scaler,
            train_loss: 0.0,
            train_len: n_train,
        };
        let train_pred =
            simulate_nlarx(&model, &series[..n_train], n_train, SimulationMode::OneStep)?;
        let start = model.min_start();
        let m = (n_train - start) as f64;
        model.train_loss = (start..n_train)
            .map(|t| (series[t] - train_pred[t]).abs())
            .sum::<f64>()
            / (2.0 * m);

        let score = if n_train < n {
            validation_rmse(&model, series, n_train)?
        } else {
            model.train_loss
        };
        if !score.is_finite() {
            return Err(Error::NonFiniteLoss(idx));
        }
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, model));
        }
    }
    Ok(best.expect("nonempty order grid").1)
}

/// Fits one surrogate per amplitude row and assembles the twin.
///
/// Coefficient fits are independent; they run in parallel with per-index
/// child seeds.
pub fn fit_twin(
    triplet: &KoopmanTriplet,
    u0: &DVector<f64>,
    dt: f64,
    t0: f64,
    config: &FitConfig,
    master_seed: u64,
) -> Result<TwinModel> {
    let a0 = initial_coefficients(u0, &triplet.modes)?;
    let surrogates: Vec<NlarxModel> = (0..triplet.rank)
        .into_par_iter()
        .map(|j| {
            let series: Vec<f64> = triplet.amplitudes.row(j).iter().copied().collect();
            fit_nlarx(&series, config, child_seed(master_seed, "nlarx-fold1", j as u64))
        })
        .collect::<Result<_>>()?;
    Ok(TwinModel { triplet: triplet.clone(), a0, surrogates, dt, t0 })
}

/// Normalized-RMSE fit in percent: `100 (1 - ||y - y_hat|| / ||y - mean(y)||)`.
pub fn nrmse_fit(measured: &[f64], predicted: &[f64]) -> f64 {
    let n = measured.len() as f64;
    let mean = measured.iter().sum::<f64>() / n;
    let res: f64 = measured
        .iter()
        .zip(predicted)
        .map(|(y, p)| (y - p) * (y - p))
        .sum::<f64>()
        .sqrt();
    let spread: f64 = measured.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>().sqrt();
    if spread <= 1e-300 {
        return if res <= 1e-300 { 100.0 } else { 0.0 };
    }
    100.0 * (1.0 - res / spread)
}

/// Per-coefficient outcome of one validation fold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientFit {
    pub coefficient: usize,
    pub fit_percent: f64,
    pub rmse: f64,
    /// Measured-minus-predicted series over the validation window.
    pub residuals: Vec<f64>,
    /// One-step predictions over the full series (training prefix included).
    pub predictions: Vec<f64>,
}

/// Results of the two-step input-output validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwofoldReport {
    /// Training-prefix length per fold (two thirds, then one third).
    pub boundaries: (usize, usize),
    pub folds: [Vec<CoefficientFit>; 2],
}

impl TwofoldReport {
    pub fn mean_fit(&self, fold: usize) -> f64 {
        let fits = &self.folds[fold];
        fits.iter().map(|c| c.fit_percent).sum::<f64>() / fits.len().max(1) as f64
    }
}

/// Training-prefix lengths of the two folds for an `n_t`-column series.
pub fn fold_boundaries(n_t: usize) -> (usize, usize) {
    (2 * n_t / 3, n_t / 3)
}

/// Two-step validation protocol: fold 1 trains on the first two thirds of
/// the coefficient series and validates on the final third; fold 2 trains on
/// the first third and validates on the remaining two thirds. Fits are
/// reported as one-step predicted-response NRMSE on the held-out window.
pub fn twofold_validate(
    amplitudes: &DMatrix<f64>,
    config: &FitConfig,
    master_seed: u64,
) -> Result<TwofoldReport> {
    let n_t = amplitudes.ncols();
    if n_t < 9 {
        return Err(Error::FoldsDegenerate(n_t));
    }
    let boundaries = fold_boundaries(n_t);
    let mut folds: [Vec<CoefficientFit>; 2] = [Vec::new(), Vec::new()];
    for (fold_idx, (n_train, stage)) in
        [(boundaries.0, "nlarx-fold1"), (boundaries.1, "nlarx-fold2")].into_iter().enumerate()
    {
        let fraction = n_train as f64 / n_t as f64 + f64::EPSILON;
        let fold_config = config.with_fraction(fraction);
        folds[fold_idx] = (0..amplitudes.nrows())
            .into_par_iter()
            .map(|j| {
                let series: Vec<f64> = amplitudes.row(j).iter().copied().collect();
                let model =
                    fit_nlarx(&series, &fold_config, child_seed(master_seed, stage, j as u64))?;
                let predictions =
                    simulate_nlarx(&model, &series, n_t, SimulationMode::OneStep)?;
                let window = n_train..n_t;
                let measured = &series[window.clone()];
                let predicted = &predictions[window.clone()];
                let rmse = (measured
                    .iter()
                    .zip(predicted)
                    .map(|(y, p)| (y - p) * (y - p))
                    .sum::<f64>()
                    / window.len() as f64)
                    .sqrt();
                Ok(CoefficientFit {
                    coefficient: j,
                    fit_percent: nrmse_fit(measured, predicted),
                    rmse,
                    residuals: measured.iter().zip(predicted).map(|(y, p)| y - p).collect(),
                    predictions,
                })
            })
            .collect::<Result<_>>()?;
    }
    Ok(TwofoldReport { boundaries, folds })
}

/// Simulates every surrogate and assembles `Phi a_hat` at the requested
/// times.
///
/// Times must lie on the twin's sampling grid (`t0 + i dt`); indices beyond
/// the training window run in free-run extrapolation with the exogenous
/// input held at its last measured value. The exogenous series visible to
/// the surrogates is the measured amplitude row truncated at the surrogate's
/// training boundary.
pub fn twin_predict(twin: &TwinModel, times: &[f64], mode: SimulationMode) -> Result<DMatrix<f64>> {
    let mut indices = Vec::with_capacity(times.len());
    for &t in times {
        if t < twin.t0 - 1e-9 * twin.dt {
            return Err(Error::TimeBeforeStart(t, twin.t0));
        }
        let step = ((t - twin.t0) / twin.dt).round();
        let snapped = twin.t0 + step * twin.dt;
        if (snapped - t).abs() > 1e-9 * twin.dt.max(t.abs()) {
            return Err(Error::Config(format!(
                "time {t} does not lie on the sampling grid (dt = {})",
                twin.dt
            )));
        }
        indices.push(step as usize);
    }
    let horizon = indices.iter().max().copied().unwrap_or(0) + 1;

    let trajectories: Vec<Vec<f64>> = (0..twin.surrogates.len())
        .into_par_iter()
        .map(|j| {
            let model = &twin.surrogates[j];
            let full_row: Vec<f64> = twin.triplet.amplitudes.row(j).iter().copied().collect();
            let boundary = model.train_len.min(full_row.len());
            let exogenous = &full_row[..boundary];
            match mode {
                SimulationMode::OneStep => {
                    simulate_nlarx(model, &full_row, horizon.min(full_row.len()), mode).map(
                        |mut sim| {
                            // extrapolation past the measured window continues closed-loop
                            if horizon > sim.len() {
                                let tail = simulate_nlarx(
                                    model,
                                    exogenous,
                                    horizon,
                                    SimulationMode::FreeRun,
                                )?;
                                sim.extend_from_slice(&tail[sim.len()..]);
                            }
                            Ok(sim)
                        },
                    )?
                }
                SimulationMode::FreeRun => simulate_nlarx(model, exogenous, horizon, mode),
            }
        })
        .collect::<Result<_>>()?;

    let k = twin.surrogates.len();
    let coeffs = DMatrix::from_fn(k, indices.len(), |j, c| trajectories[j][indices[c]]);
    Ok(&twin.triplet.modes * coeffs)
}
