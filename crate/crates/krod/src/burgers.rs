//! Ground-truth snapshot data for the viscous Burgers equation.
//!
//! The equation `u_t + (u^2/2)_x = nu u_xx` with three initial conditions of
//! increasing difficulty (a sine pulse, a two-plateau Riemann step, and a
//! squared-cosine pulse) admits closed-form solutions through the Cole-Hopf
//! transformation: `u(x,t)` is a ratio of two heat-kernel integrals of the
//! transformed initial state. After the substitution `z = (x - xi)/sqrt(4 nu t)`
//! both integrals carry the Gaussian weight `e^{-z^2}`, so the sine and
//! squared-cosine cases are evaluated as ratios of Gauss-Hermite sums of the
//! configured order. Exponents scale like `1/nu` and are rescaled by their
//! maximum over the nodes before exponentiation; the shift cancels in the
//! ratio.
//!
//! The Riemann initial state is piecewise constant, so its transformed state
//! is a piecewise exponential with a kink at the jump. Gauss-Hermite applied
//! across the kink converges too slowly to be useful, but each branch is a
//! linear-exponential tilt of the Gaussian kernel and completes the square to
//! an erf/erfc expression; the Riemann case is therefore evaluated in that
//! closed branch form (the quadrature order does not enter).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{hermite_rule, QuadratureRule};

/// Which initial condition drives the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// `u0(x) = -sin(pi x)`.
    Sine,
    /// `u0(x) = u_left` for `x <= 0`, `u_right` for `x > 0`.
    Riemann,
    /// `u0(x) = -cos^2(1.5 pi x)`.
    CosSquared,
}

/// Full description of one snapshot-generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    /// Viscosity `nu > 0`.
    pub nu: f64,
    /// Domain length `L`; the grid spans `[0, L]`.
    pub domain_length: f64,
    /// Final time `T`.
    pub final_time: f64,
    /// Number of spatial grid points (>= 2).
    pub n_space: usize,
    /// Number of time steps; snapshots are taken at `t_i = i T / n_time`,
    /// `i = 0..=n_time`.
    pub n_time: usize,
    /// Gauss-Hermite order for the integral ratios.
    pub quad_order: usize,
    /// Left plateau of the Riemann step (used only by `Experiment::Riemann`).
    #[serde(default = "default_u_left")]
    pub riemann_left: f64,
    /// Right plateau of the Riemann step (used only by `Experiment::Riemann`).
    #[serde(default = "default_u_right")]
    pub riemann_right: f64,
}

fn default_u_left() -> f64 {
    0.1
}

fn default_u_right() -> f64 {
    0.5
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::Config(format!("nu must be positive (got {})", self.nu)));
        }
        if !(self.domain_length > 0.0) {
            return Err(Error::Config(format!(
                "domain_length must be positive (got {})",
                self.domain_length
            )));
        }
        if !(self.final_time > 0.0) {
            return Err(Error::Config(format!(
                "final_time must be positive (got {})",
                self.final_time
            )));
        }
        if self.n_space < 2 {
            return Err(Error::Config(format!("n_space must be >= 2 (got {})", self.n_space)));
        }
        if self.n_time < 2 {
            return Err(Error::Config(format!("n_time must be >= 2 (got {})", self.n_time)));
        }
        if self.quad_order == 0 || self.quad_order > crate::quadrature::MAX_ORDER {
            return Err(Error::Config(format!(
                "quad_order must lie in 1..={} (got {})",
                crate::quadrature::MAX_ORDER,
                self.quad_order
            )));
        }
        Ok(())
    }

    /// Uniform grid over `[0, L]`.
    pub fn x_grid(&self) -> Vec<f64> {
        let h = self.domain_length / (self.n_space - 1) as f64;
        (0..self.n_space).map(|j| j as f64 * h).collect()
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.n_time as f64
    }

    /// The analytical initial condition `u0(x)`.
    ///
    /// The Riemann step takes the left value at the jump point itself
    /// (half-open convention: `x <= 0` maps to the left plateau).
    pub fn initial_condition(&self, x: f64) -> f64 {
        match self.experiment {
            Experiment::Sine => -(std::f64::consts::PI * x).sin(),
            Experiment::Riemann => {
                if x <= 0.0 {
                    self.riemann_left
                } else {
                    self.riemann_right
                }
            }
            Experiment::CosSquared => {
                let c = (1.5 * std::f64::consts::PI * x).cos();
                -c * c
            }
        }
    }
}

/// Space-time data matrix with grid metadata. Column `i` holds
/// `u(., t0 + i*dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub values: DMatrix<f64>,
    pub x_grid: Vec<f64>,
    pub dt: f64,
    pub t0: f64,
}

impl SnapshotSet {
    /// Checks finiteness and grid uniformity.
    pub fn validate(&self) -> Result<()> {
        if self.values.nrows() != self.x_grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "values have {} rows but the grid has {} points",
                self.values.nrows(),
                self.x_grid.len()
            )));
        }
        for (idx, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                let col = idx / self.values.nrows();
                let row = idx % self.values.nrows();
                return Err(Error::NonFiniteMatrix { row, col });
            }
        }
        let n = self.x_grid.len();
        if n >= 2 {
            let h = (self.x_grid[n - 1] - self.x_grid[0]) / (n - 1) as f64;
            let scale = self.x_grid[n - 1].abs().max(1.0);
            for j in 1..n {
                let step = self.x_grid[j] - self.x_grid[j - 1];
                if (step - h).abs() > 1e-12 * scale || step <= 0.0 {
                    return Err(Error::Config(format!(
                        "x grid is not uniformly increasing near index {j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Log-scale integrand exponent for the Gauss-Hermite experiments: the
/// Cole-Hopf transform of the initial condition evaluated at
/// `xi = x - z sqrt(4 nu t)`, i.e. `-(1/2nu) * integral_0^xi u0`.
fn log_phi0(spec: &ExperimentSpec, xi: f64) -> f64 {
    match spec.experiment {
        // integral of -sin(pi s) over [0, xi] = (cos(pi xi) - 1)/pi; the
        // constant part cancels in the ratio and is dropped.
        Experiment::Sine => -(std::f64::consts::PI * xi).cos() / (2.0 * spec.nu * std::f64::consts::PI),
        // integral of -cos^2(1.5 pi s) = -(xi + sin(3 pi xi)/(3 pi))/2.
        Experiment::CosSquared => {
            let three_pi = 3.0 * std::f64::consts::PI;
            ((three_pi * xi).sin() / three_pi + xi) / (4.0 * spec.nu)
        }
        Experiment::Riemann => unreachable!("the Riemann case uses the closed branch form"),
    }
}

/// Evaluates the exact solution `u(x, t)` for `t > 0` and `x` in `[0, L]`.
pub fn exact_solution(spec: &ExperimentSpec, rule: &QuadratureRule, x: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if !(0.0..=spec.domain_length).contains(&x) {
        return Err(Error::OutOfDomain { x, length: spec.domain_length });
    }
    match spec.experiment {
        Experiment::Riemann => Ok(riemann_solution(spec, x, t)),
        _ => gh_ratio(spec, rule, x, t),
    }
}

/// Ratio of the two Gauss-Hermite sums, rescaled by the largest exponent so
/// `1/nu`-sized exponents cannot overflow. The common factor `e^{g_max}`
/// cancels between numerator and denominator.
fn gh_ratio(spec: &ExperimentSpec, rule: &QuadratureRule, x: f64, t: f64) -> Result<f64> {
    let spread = (4.0 * spec.nu * t).sqrt();
    let nodes = rule.nodes();
    let weights = rule.weights();

    let mut exponents = Vec::with_capacity(nodes.len());
    let mut g_max = f64::NEG_INFINITY;
    for &z in nodes {
        let g = log_phi0(spec, x - z * spread);
        if !g.is_finite() {
            return Err(Error::NonFiniteIntegrand { index: exponents.len(), node: z, value: g });
        }
        g_max = g_max.max(g);
        exponents.push(g);
    }

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for ((&z, &w), &g) in nodes.iter().zip(weights).zip(&exponents) {
        let e = (g - g_max).exp();
        numerator += w * 4.0 * spec.nu * z * e;
        denominator += w * spread * e;
    }
    if denominator.abs() < 1e-300 {
        return Err(Error::OverflowGuard(denominator));
    }
    Ok(numerator / denominator)
}

/// Closed-form Riemann solution.
///
/// The transformed initial state is `exp(-a xi / 2nu)` with `a = u_left` on
/// `xi <= 0` and `a = u_right` on `xi > 0`. Completing the square in each
/// heat-kernel branch integral gives, with `s_a = (a t - x)/sqrt(4 nu t)` and
/// `E_a = a(2x - a t)/(4 nu)`:
///
/// ```text
///   D = e^{-E_L} (sqrt(pi)/2) (1 + erf(s_L)) + e^{-E_R} (sqrt(pi)/2) erfc(s_R)
///   N = e^{-E_L} [u_L (sqrt(pi)/2)(1 + erf(s_L)) + c e^{-s_L^2}/2]
///     + e^{-E_R} [u_R (sqrt(pi)/2) erfc(s_R)     - c e^{-s_R^2}/2]
/// ```
///
/// with `c = sqrt(4 nu / t)` and `u = N/D`. Both branch prefactors are
/// rescaled by their maximum before exponentiation.
fn riemann_solution(spec: &ExperimentSpec, x: f64, t: f64) -> f64 {
    let (u_l, u_r, nu) = (spec.riemann_left, spec.riemann_right, spec.nu);
    let spread = (4.0 * nu * t).sqrt();
    let half_sqrt_pi = 0.5 * std::f64::consts::PI.sqrt();
    let c = (4.0 * nu / t).sqrt();

    let s_l = (u_l * t - x) / spread;
    let s_r = (u_r * t - x) / spread;
    let e_l = u_l * (2.0 * x - u_l * t) / (4.0 * nu);
    let e_r = u_r * (2.0 * x - u_r * t) / (4.0 * nu);

    let shift = (-e_l).max(-e_r);
    let a_l = (-e_l - shift).exp();
    let a_r = (-e_r - shift).exp();

    let left_mass = half_sqrt_pi * (1.0 + libm::erf(s_l));
    let right_mass = half_sqrt_pi * libm::erfc(s_r);

    let denominator = a_l * left_mass + a_r * right_mass;
    let numerator = a_l * (u_l * left_mass + 0.5 * c * (-s_l * s_l).exp())
        + a_r * (u_r * right_mass - 0.5 * c * (-s_r * s_r).exp());
    numerator / denominator
}

/// Generates the full snapshot matrix for `spec`.
///
/// Column 0 is filled from the analytical initial condition (the integral
/// ratio is singular at `t = 0`); columns `i >= 1` evaluate the exact
/// solution at `t_i = i * dt`. Columns are independent and evaluated in
/// parallel.
pub fn generate_snapshots(spec: &ExperimentSpec) -> Result<SnapshotSet> {
    spec.validate()?;
    let rule = hermite_rule(spec.quad_order)?;
    let x_grid = spec.x_grid();
    let dt = spec.dt();

    let columns: Vec<Vec<f64>> = (0..=spec.n_time)
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                return Ok(x_grid.iter().map(|&x| spec.initial_condition(x)).collect());
            }
            let t = i as f64 * dt;
            x_grid
                .iter()
                .map(|&x| {
                    exact_solution(spec, &rule, x, t).map_err(|e| Error::Snapshot {
                        column: i,
                        time: t,
                        source: Box::new(e),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let values = DMatrix::from_fn(spec.n_space, spec.n_time + 1, |r, c| columns[c][r]);
    let set = SnapshotSet { values, x_grid, dt, t0: 0.0 };
    set.validate()?;
    Ok(set)
}
