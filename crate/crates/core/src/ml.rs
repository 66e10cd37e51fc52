//! Gaussian quasi-maximum likelihood for the unrestricted VMA(1)
//! `z_t = u_t − Θu_{t−1}`, the baseline the aggregation estimator is
//! compared against.
//!
//! Parameters are optimized as the `N²` entries of `Θ` followed by the
//! lower-triangular Cholesky factor `L` of `Σ_u` (diagonal on log scale),
//! by BFGS on central finite-difference gradients.

use std::time::Instant;

use nalgebra::{Cholesky, DVector};
use serde::Serialize;

use crate::error::{Error, Result, Stage};
use crate::linalg::{min_symmetric_eigenvalue, spectral_radius, symmetrize, Matrix};
use crate::meta::{meta_fit, mom_fit, sample_autocov, MIN_SAMPLE};
use crate::model::ReducedParams;
use crate::optimize::{bfgs_minimize, BfgsOptions};
use crate::series::{SeriesKind, SeriesMatrix};

/// Largest spectral radius an ML estimate of `Θ` is allowed to keep.
pub const MAX_THETA_RADIUS: f64 = 1.0 - 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum MlInit {
    /// Sample-moment estimate.
    Moment,
    /// Aggregation estimate.
    Meta,
    Explicit(ReducedParams),
}

#[derive(Debug, Clone)]
pub struct MlConfig {
    pub max_iterations: usize,
    pub gradient_step: f64,
    /// Relative NLL decrease below which an iteration counts as converged.
    pub convergence_tol: f64,
    pub init: MlInit,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            max_iterations: 500,
            gradient_step: 1e-6,
            convergence_tol: 1e-10,
            init: MlInit::Moment,
        }
    }
}

impl MlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be at least 1".into()));
        }
        if !(self.gradient_step > 0.0) || !(self.convergence_tol > 0.0) {
            return Err(Error::Invalid("ML tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MlStatus {
    Converged,
    MaxIterationsExceeded,
}

#[derive(Debug, Clone, Serialize)]
pub struct MlFit {
    #[serde(serialize_with = "crate::meta::ser_reduced")]
    pub reduced: ReducedParams,
    pub status: MlStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub initial_nll: f64,
    pub final_nll: f64,
    /// `Θ̂` was scaled back inside the unit disk after optimization.
    pub projected: bool,
    /// Which initializer produced the starting point (`moment`, `meta`,
    /// `explicit`, or `fallback`).
    pub init_source: &'static str,
    pub elapsed_seconds: f64,
}

/// `½ Σ_t (log det Σ_u + u_tᵀ Σ_u⁻¹ u_t)` with `u₀ = 0`, `Σ_u = LLᵀ`.
///
/// `theta` is row-major, `l` is the full row-major `N × N` lower factor.
fn nll_kernel(z: &SeriesMatrix, theta: &[f64], l: &[f64]) -> f64 {
    let n = z.cols();
    let mut log_det = 0.0;
    for i in 0..n {
        let d = l[i * n + i];
        if !(d > 0.0) {
            return f64::INFINITY;
        }
        log_det += 2.0 * d.ln();
    }
    let mut u = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut quad = 0.0;
    for row in z.row_iter() {
        for i in 0..n {
            let th = &theta[i * n..(i + 1) * n];
            next[i] = row[i] + th.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
        }
        std::mem::swap(&mut u, &mut next);
        // forward substitution L y = u
        for i in 0..n {
            let mut s = u[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
            quad += y[i] * y[i];
        }
    }
    let val = 0.5 * (z.rows() as f64 * log_det + quad);
    if val.is_finite() {
        val
    } else {
        f64::INFINITY
    }
}

fn lower_factor(sigma_u: &Matrix) -> Result<Matrix> {
    Cholesky::new(sigma_u.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite {
            what: "sigma_u",
            min_eigenvalue: min_symmetric_eigenvalue(sigma_u),
        })
}

fn row_major(m: &Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn check_dims(z: &SeriesMatrix, n: usize) -> Result<()> {
    z.require_kind(SeriesKind::Differences)?;
    if z.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: z.cols(),
        });
    }
    Ok(())
}

/// Conditional Gaussian negative log-likelihood of the VMA(1), constants dropped.
pub fn vma_nll(z: &SeriesMatrix, r: &ReducedParams) -> Result<f64> {
    check_dims(z, r.dim())?;
    let l = lower_factor(&r.sigma_u)?;
    Ok(nll_kernel(z, &row_major(&r.theta), &row_major(&l)))
}

struct Packing {
    n: usize,
}

impl Packing {
    fn len(&self) -> usize {
        self.n * self.n + self.n * (self.n + 1) / 2
    }

    fn pack(&self, theta: &Matrix, l: &Matrix) -> DVector<f64> {
        let n = self.n;
        let mut v = Vec::with_capacity(self.len());
        v.extend(row_major(theta));
        for i in 0..n {
            for j in 0..=i {
                v.push(if i == j { l[(i, i)].ln() } else { l[(i, j)] });
            }
        }
        DVector::from_vec(v)
    }

    /// Writes `Θ` and `L` (both row-major) from the packed vector.
    fn unpack_into(&self, p: &DVector<f64>, theta: &mut [f64], l: &mut [f64]) {
        let n = self.n;
        theta.copy_from_slice(&p.as_slice()[..n * n]);
        let mut k = n * n;
        for i in 0..n {
            for j in 0..=i {
                l[i * n + j] = if i == j { p[k].exp() } else { p[k] };
                k += 1;
            }
        }
    }

    fn unpack(&self, p: &DVector<f64>) -> (Matrix, Matrix) {
        let n = self.n;
        let mut th = vec![0.0; n * n];
        let mut l = vec![0.0; n * n];
        self.unpack_into(p, &mut th, &mut l);
        (Matrix::from_row_slice(n, n, &th), Matrix::from_row_slice(n, n, &l))
    }
}

fn fallback_init(z: &SeriesMatrix) -> Result<ReducedParams> {
    let n = z.cols();
    let (g0, _) = sample_autocov(z);
    ReducedParams::new(Matrix::identity(n, n) * 0.1, g0).map_err(|e| e.at(Stage::Likelihood))
}

fn initial_point(z: &SeriesMatrix, init: &MlInit) -> Result<(ReducedParams, &'static str)> {
    let attempt = match init {
        MlInit::Moment => mom_fit(z).map(|r| (r, "moment")),
        MlInit::Meta => meta_fit(z).map(|rep| (rep.reduced, "meta")),
        MlInit::Explicit(r) => {
            check_dims(z, r.dim())?;
            return Ok((r.clone(), "explicit"));
        }
    };
    match attempt {
        Ok(ok) => Ok(ok),
        Err(_) => Ok((fallback_init(z)?, "fallback")),
    }
}

/// Quasi-Newton maximum likelihood on the full `(Θ, Σ_u)` parameter space.
///
/// Running out of iterations is not an error: the best point so far is
/// returned with [`MlStatus::MaxIterationsExceeded`]. The reported NLL is
/// never above the NLL at the starting point.
pub fn ml_fit(z: &SeriesMatrix, cfg: &MlConfig) -> Result<MlFit> {
    let start = Instant::now();
    cfg.validate()?;
    z.require_kind(SeriesKind::Differences)?;
    if z.rows() < MIN_SAMPLE {
        return Err(Error::Invalid(format!(
            "need at least {MIN_SAMPLE} differenced observations, got {}",
            z.rows()
        )));
    }
    let n = z.cols();
    let (init, init_source) = initial_point(z, &cfg.init)?;
    let packing = Packing { n };
    let x0 = packing.pack(&init.theta, &lower_factor(&init.sigma_u)?);

    let mut th_buf = vec![0.0; n * n];
    let mut l_buf = vec![0.0; n * n];
    let objective = |p: &DVector<f64>| {
        packing.unpack_into(p, &mut th_buf, &mut l_buf);
        nll_kernel(z, &th_buf, &l_buf)
    };
    let opts = BfgsOptions {
        max_iterations: cfg.max_iterations,
        gradient_step: cfg.gradient_step,
        convergence_tol: cfg.convergence_tol,
    };
    let initial_nll = vma_nll(z, &init)?;
    let res = bfgs_minimize(objective, x0, &opts);

    let (mut theta, l) = packing.unpack(&res.x);
    let (sigma_u, _) = symmetrize(&(&l * l.transpose()));
    let radius = spectral_radius(&theta)?;
    let mut projected = false;
    if radius > MAX_THETA_RADIUS {
        theta *= MAX_THETA_RADIUS / radius;
        projected = true;
    }
    let mut reduced = ReducedParams::new(theta, sigma_u).map_err(|e| e.at(Stage::Likelihood))?;
    let mut final_nll = if projected { vma_nll(z, &reduced)? } else { res.fx };
    if final_nll > initial_nll {
        reduced = init;
        final_nll = initial_nll;
    }

    Ok(MlFit {
        reduced,
        status: if res.converged {
            MlStatus::Converged
        } else {
            MlStatus::MaxIterationsExceeded
        },
        iterations: res.iterations,
        evaluations: res.evaluations,
        initial_nll,
        final_nll,
        projected,
        init_source,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::structural_to_reduced;
    use crate::scalar::{self, ScalarMA1Params, ScalarSeries};
    use crate::simulate::{difference, preset, simulate, SimulationSpec};

    fn diffs(model: u32, len: usize, seed: u64) -> SeriesMatrix {
        difference(&simulate(&SimulationSpec::new(preset(model).unwrap(), len, seed)).unwrap()).unwrap()
    }

    #[test]
    fn zero_theta_is_iid_gaussian() {
        let z = diffs(1, 50, 1);
        let s = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let r = ReducedParams::new(Matrix::zeros(2, 2), s.clone()).unwrap();
        let sinv = s.clone().try_inverse().unwrap();
        let expected: f64 = z
            .row_iter()
            .map(|row| {
                let v = nalgebra::DVector::from_column_slice(row);
                0.5 * (s.determinant().ln() + v.dot(&(&sinv * &v)))
            })
            .sum();
        assert!((vma_nll(&z, &r).unwrap() - expected).abs() < 1e-10 * expected.abs());
    }

    #[test]
    fn scalar_case_matches_scalar_nll() {
        let x = scalar::simulate_ma1(&ScalarMA1Params { psi: -0.3, sigma: 1.5 }, 80, 4);
        let z = SeriesMatrix::from_row_major(SeriesKind::Differences, 1, x.clone()).unwrap();
        let r = ReducedParams::new(Matrix::from_element(1, 1, 0.45), Matrix::from_element(1, 1, 0.8)).unwrap();
        let a = vma_nll(&z, &r).unwrap();
        let b = scalar::nll(&ScalarSeries::new(x).unwrap(), 0.45, 0.8).unwrap();
        assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn packing_roundtrip() {
        let p = Packing { n: 3 };
        let theta = Matrix::from_fn(3, 3, |i, j| 0.1 * (i as f64) - 0.05 * j as f64);
        let l = Matrix::from_row_slice(3, 3, &[1.2, 0.0, 0.0, 0.3, 0.7, 0.0, -0.2, 0.1, 2.0]);
        let v = p.pack(&theta, &l);
        assert_eq!(v.len(), p.len());
        let (t2, l2) = p.unpack(&v);
        assert!((t2 - theta).amax() < 1e-15);
        assert!((l2 - l).amax() < 1e-14);
    }

    #[test]
    fn init_at_truth_barely_moves() {
        let truth = structural_to_reduced(&preset(1).unwrap()).unwrap();
        let z = diffs(1, 1001, 77);
        let cfg = MlConfig {
            init: MlInit::Explicit(truth.clone()),
            ..MlConfig::default()
        };
        let f = ml_fit(&z, &cfg).unwrap();
        assert!(f.final_nll <= f.initial_nll);
        let moved = (&f.reduced.theta - &truth.theta).norm() / truth.theta.norm();
        // Monte Carlo spread of Θ̂ at T = 1000 is around 0.1 relative
        assert!(moved < 0.2, "{moved}");
    }

    #[test]
    fn scalar_ml_agrees_with_scalar_fit() {
        let x = scalar::simulate_ma1(&ScalarMA1Params { psi: 0.5, sigma: 2.0 }, 500, 8);
        let z = SeriesMatrix::from_row_major(SeriesKind::Differences, 1, x.clone()).unwrap();
        let cfg = MlConfig {
            convergence_tol: 1e-14,
            ..MlConfig::default()
        };
        let f = ml_fit(&z, &cfg).unwrap();
        let s = scalar::fit(&ScalarSeries::new(x).unwrap()).unwrap();
        assert!((f.reduced.theta[(0, 0)] - s.params.psi).abs() < 1e-4);
        assert!((f.reduced.sigma_u[(0, 0)] - s.params.sigma).abs() < 1e-4 * s.params.sigma.max(1.0));
    }

    #[test]
    fn config_validation() {
        let z = diffs(1, 100, 1);
        let bad = MlConfig {
            max_iterations: 0,
            ..MlConfig::default()
        };
        assert!(ml_fit(&z, &bad).is_err());
        let one = MlConfig {
            max_iterations: 1,
            convergence_tol: 1e-300,
            ..MlConfig::default()
        };
        let f = ml_fit(&z, &one).unwrap();
        assert_eq!(f.status, MlStatus::MaxIterationsExceeded);
        assert!(f.final_nll <= f.initial_nll);
    }
}
