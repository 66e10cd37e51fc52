//! Scalar MA(1) estimation, `x_t = v_t − ψ v_{t−1}` with `E[v_t²] = σ`.
//!
//! `σ` is a variance throughout. The likelihood is the Gaussian one built
//! from the residual recursion `ṽ₁ = x₁`, `ṽ_t = x_t + ψ ṽ_{t−1}` (zero
//! pre-sample innovation).

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optimize::brent_minimize;
use crate::simulate::rng_from_seed;

/// Interior margin kept between `ψ` and the invertibility boundary.
pub const PSI_MARGIN: f64 = 1e-4;
/// Distance from `±(1 − PSI_MARGIN)` at which a fit is flagged as piled up.
pub const BOUNDARY_FLAG: f64 = 1e-3;
const PSI_XTOL: f64 = 1e-8;
const GRID_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarMA1Params {
    pub psi: f64,
    /// Innovation variance.
    pub sigma: f64,
}

impl ScalarMA1Params {
    pub fn new(psi: f64, sigma: f64) -> Result<Self> {
        if !(psi.abs() < 1.0) {
            return Err(Error::Domain(format!("|psi| must be < 1, got {psi}")));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(ScalarMA1Params { psi, sigma })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSeries {
    values: Vec<f64>,
}

impl ScalarSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Invalid(format!(
                "scalar series needs at least 3 observations, got {}",
                values.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("scalar series has non-finite values".into()));
        }
        Ok(ScalarSeries { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `Σ ṽ_t(ψ)²`.
pub fn residual_sum_of_squares(x: &[f64], psi: f64) -> f64 {
    let mut v = 0.0;
    let mut ss = 0.0;
    for &xt in x {
        v = xt + psi * v;
        ss += v * v;
    }
    ss
}

/// Negative log-likelihood `Σ_t ½ log σ + ṽ_t² / (2σ)` (constants dropped).
pub fn nll(series: &ScalarSeries, psi: f64, sigma: f64) -> Result<f64> {
    ScalarMA1Params::new(psi, sigma)?;
    let t = series.len() as f64;
    let ss = residual_sum_of_squares(series.values(), psi);
    Ok(0.5 * t * sigma.ln() + ss / (2.0 * sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarFit {
    pub params: ScalarMA1Params,
    /// Negative log-likelihood at the optimum.
    pub nll: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `ψ̂` sits within [`BOUNDARY_FLAG`] of the search boundary.
    pub boundary: bool,
}

/// Maximum-likelihood fit with `σ` concentrated out, `σ̂(ψ) = (1/T) Σ ṽ_t(ψ)²`.
///
/// A coarse grid over `[−1+δ, 1−δ]` picks the basin; Brent's method then
/// refines `ψ` inside the neighbouring grid cells until `|Δψ| < 1e-8`.
pub fn fit(series: &ScalarSeries) -> Result<ScalarFit> {
    let x = series.values();
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return Err(Error::DegenerateSeries);
    }
    let t = x.len() as f64;
    let objective = |psi: f64| residual_sum_of_squares(x, psi).ln();

    let bound = 1.0 - PSI_MARGIN;
    let cells = (2.0 * bound / GRID_STEP).ceil() as usize;
    let grid: Vec<f64> = (0..=cells)
        .map(|i| -bound + 2.0 * bound * i as f64 / cells as f64)
        .collect();
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &p)| (i, objective(p)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(cells)];

    let m = brent_minimize(objective, lo, hi, grid[best], PSI_XTOL, 200);
    let psi = m.x;
    let ss = residual_sum_of_squares(x, psi);
    let sigma = ss / t;
    if !(sigma > 0.0) {
        return Err(Error::DegenerateSeries);
    }
    Ok(ScalarFit {
        params: ScalarMA1Params { psi, sigma },
        nll: 0.5 * t * (sigma.ln() + 1.0),
        iterations: m.iterations + grid.len(),
        converged: m.converged,
        boundary: bound - psi.abs() < BOUNDARY_FLAG,
    })
}

/// `γ₀ = (1 + ψ²)σ`, `γ₁ = −ψσ`.
pub fn moments_from_params(p: &ScalarMA1Params) -> (f64, f64) {
    ((1.0 + p.psi * p.psi) * p.sigma, -p.psi * p.sigma)
}

/// Invertible MA(1) with the given lag-0/lag-1 autocovariances.
pub fn params_from_moments(gamma0: f64, gamma1: f64) -> Result<ScalarMA1Params> {
    if !(gamma0 > 0.0) || !gamma1.is_finite() {
        return Err(Error::NotRepresentable { gamma0, gamma1 });
    }
    let r = -gamma1 / gamma0;
    if r.abs() >= 0.5 {
        return Err(Error::NotRepresentable { gamma0, gamma1 });
    }
    if r == 0.0 {
        return ScalarMA1Params::new(0.0, gamma0);
    }
    // ψ/(1+ψ²) = r  ⇔  rψ² − ψ + r = 0; the small root, written without cancellation
    let psi = 2.0 * r / (1.0 + (1.0 - 4.0 * r * r).sqrt());
    ScalarMA1Params::new(psi, -gamma1 / psi)
}

/// Asymptotic per-observation information `diag(1/(1−ψ²), 1/(2σ²))`.
pub fn fisher_info(p: &ScalarMA1Params) -> Matrix {
    Matrix::from_diagonal(&nalgebra::dvector![
        1.0 / (1.0 - p.psi * p.psi),
        1.0 / (2.0 * p.sigma * p.sigma)
    ])
}

/// Gaussian MA(1) sample path with a drawn pre-sample innovation.
pub fn simulate_ma1(p: &ScalarMA1Params, len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let sd = p.sigma.sqrt();
    let draw = |rng: &mut _| -> f64 { StandardNormal.sample(rng) };
    let mut prev = sd * draw(&mut rng);
    (0..len)
        .map(|_| {
            let v = sd * draw(&mut rng);
            let x = v - p.psi * prev;
            prev = v;
            x
        })
        .collect()
}
