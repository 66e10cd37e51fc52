//! Structural, reduced and autocovariance parameterizations of the
//! multivariate local-level model, and the closed-form maps among them.
//!
//! Structural form: `y_t = μ_t + ε_t`, `μ_t = μ_{t-1} + η_t` with noise
//! covariances `Σ_η`, `Σ_ε`. Reduced form: `z_t = y_t - y_{t-1} = u_t - Θ u_{t-1}`
//! with `E[u_t u_tᵀ] = Σ_u`. Lag-0/lag-1 autocovariances of `z_t`:
//! `Γ₀ = Σ_u + ΘΣ_uΘᵀ = Σ_η + 2Σ_ε` and `Γ₁ = −ΘΣ_u = −Σ_ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_square, checked_inverse, relative_asymmetry, require_pd, solve_theta_quadratic,
    spectral_radius, sqrt_via_eig, symmetrize, Matrix,
};

const STRUCTURAL_SYM_TOL: f64 = 1e-12;
const DERIVED_SYM_TOL: f64 = 1e-8;

fn require_symmetric(m: &Matrix, what: &'static str, tol: f64) -> Result<()> {
    let asymmetry = relative_asymmetry(m);
    if asymmetry > tol {
        return Err(Error::NotSymmetric { what, asymmetry });
    }
    Ok(())
}

fn require_same_dim(a: &Matrix, b: &Matrix) -> Result<usize> {
    let n = check_square(a)?;
    let m = check_square(b)?;
    if n != m {
        return Err(Error::DimensionMismatch { expected: n, got: m });
    }
    Ok(n)
}

/// Noise covariances of the structural model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "json::StructuralJson", into = "json::StructuralJson")]
pub struct StructuralParams {
    pub sigma_eta: Matrix,
    pub sigma_eps: Matrix,
}

impl StructuralParams {
    pub fn new(sigma_eta: Matrix, sigma_eps: Matrix) -> Result<Self> {
        let s = StructuralParams { sigma_eta, sigma_eps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        require_same_dim(&self.sigma_eta, &self.sigma_eps)?;
        require_symmetric(&self.sigma_eta, "sigma_eta", STRUCTURAL_SYM_TOL)?;
        require_symmetric(&self.sigma_eps, "sigma_eps", STRUCTURAL_SYM_TOL)?;
        require_pd(&self.sigma_eta, "sigma_eta")?;
        require_pd(&self.sigma_eps, "sigma_eps")
    }

    pub fn dim(&self) -> usize {
        self.sigma_eta.nrows()
    }

    /// The signal-to-noise matrix `Q = Σ_η Σ_ε⁻¹`.
    pub fn signal_to_noise(&self) -> Result<Matrix> {
        Ok(&self.sigma_eta * checked_inverse(&self.sigma_eps, "sigma_eps")?)
    }
}

/// MA coefficient and innovation covariance of the integrated VMA(1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "json::ReducedJson", into = "json::ReducedJson")]
pub struct ReducedParams {
    pub theta: Matrix,
    pub sigma_u: Matrix,
}

impl ReducedParams {
    /// Checks invertibility of `theta` and that `sigma_u` is a covariance.
    ///
    /// Symmetry of `ΘΣ_u` is not required here: the unrestricted ML baseline
    /// produces reduced parameters outside the exponential-smoothing class.
    /// Use [`ReducedParams::ewma_asymmetry`] to test class membership.
    pub fn new(theta: Matrix, sigma_u: Matrix) -> Result<Self> {
        let r = ReducedParams { theta, sigma_u };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        require_same_dim(&self.theta, &self.sigma_u)?;
        let radius = spectral_radius(&self.theta)?;
        if radius >= 1.0 {
            return Err(Error::NotInvertible { radius });
        }
        require_symmetric(&self.sigma_u, "sigma_u", DERIVED_SYM_TOL)?;
        require_pd(&self.sigma_u, "sigma_u")
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    /// Relative asymmetry of `ΘΣ_u`; zero (up to round-off) for parameters
    /// generated by a structural model.
    pub fn ewma_asymmetry(&self) -> f64 {
        relative_asymmetry(&(&self.theta * &self.sigma_u))
    }
}

/// Lag-0 and lag-1 autocovariances of the differenced process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "json::AutocovJson", into = "json::AutocovJson")]
pub struct AutocovPair {
    pub gamma0: Matrix,
    pub gamma1: Matrix,
}

impl AutocovPair {
    pub fn new(gamma0: Matrix, gamma1: Matrix) -> Result<Self> {
        let a = AutocovPair { gamma0, gamma1 };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        require_same_dim(&self.gamma0, &self.gamma1)?;
        require_symmetric(&self.gamma0, "gamma0", DERIVED_SYM_TOL)?;
        require_symmetric(&self.gamma1, "gamma1", DERIVED_SYM_TOL)?;
        require_pd(&self.gamma0, "gamma0")
    }

    pub fn dim(&self) -> usize {
        self.gamma0.nrows()
    }
}

/// `Θ = ½(Q + 2I − (Q² + 4Q)^{1/2})`, `Σ_u = Θ⁻¹Σ_ε`.
pub fn structural_to_reduced(s: &StructuralParams) -> Result<ReducedParams> {
    s.validate()?;
    let n = s.dim();
    let q = s.signal_to_noise()?;
    let eye = Matrix::identity(n, n);
    let root = sqrt_via_eig(&(&q * &q + &q * 4.0))?;
    let theta = (&q + &eye * 2.0 - root) * 0.5;
    let (sigma_u, _) = symmetrize(&(checked_inverse(&theta, "theta")? * &s.sigma_eps));
    ReducedParams::new(theta, sigma_u)
}

/// `Σ_ε = ΘΣ_u` and `Σ_η = Σ_u + ΘΣ_uΘᵀ − 2Σ_ε`, without the definiteness check.
///
/// Finite-sample estimates can map to an indefinite `Σ_η`; callers that want
/// to report rather than reject that case use this.
pub fn reduced_to_structural_unchecked(r: &ReducedParams) -> StructuralParams {
    let (sigma_eps, _) = symmetrize(&(&r.theta * &r.sigma_u));
    let (gamma0, _) = symmetrize(&(&r.sigma_u + &r.theta * &r.sigma_u * r.theta.transpose()));
    let sigma_eta = gamma0 - &sigma_eps * 2.0;
    StructuralParams { sigma_eta, sigma_eps }
}

pub fn reduced_to_structural(r: &ReducedParams) -> Result<StructuralParams> {
    r.validate()?;
    let s = reduced_to_structural_unchecked(r);
    require_pd(&s.sigma_eps, "sigma_eps")?;
    require_pd(&s.sigma_eta, "sigma_eta")?;
    Ok(s)
}

pub fn params_to_autocov(r: &ReducedParams) -> Result<AutocovPair> {
    r.validate()?;
    let (gamma0, _) = symmetrize(&(&r.sigma_u + &r.theta * &r.sigma_u * r.theta.transpose()));
    let (gamma1, _) = symmetrize(&-(&r.theta * &r.sigma_u));
    AutocovPair::new(gamma0, gamma1)
}

/// Details of a recovery from autocovariances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryDiagnostics {
    /// Some selected root of the matrix quadratic had an imaginary part.
    pub complex_roots: bool,
    /// Relative asymmetry of `−Θ⁻¹Γ₁` before symmetrization.
    pub sigma_u_asymmetry: f64,
    pub theta_spectral_radius: f64,
}

/// Θ from the unit-disk solution of `Θ² + Γ₀Γ₁⁻¹Θ + I = 0`, then `Σ_u = −Θ⁻¹Γ₁`.
pub fn autocov_to_reduced(a: &AutocovPair) -> Result<ReducedParams> {
    autocov_to_reduced_detailed(a).map(|(r, _)| r)
}

pub fn autocov_to_reduced_detailed(a: &AutocovPair) -> Result<(ReducedParams, RecoveryDiagnostics)> {
    require_same_dim(&a.gamma0, &a.gamma1)?;
    let g1_inv = checked_inverse(&a.gamma1, "gamma1")?;
    let sol = solve_theta_quadratic(&(&a.gamma0 * g1_inv))?;
    let theta = sol.theta;
    let theta_inv = checked_inverse(&theta, "theta")?;
    let (sigma_u, sigma_u_asymmetry) = symmetrize(&-(theta_inv * &a.gamma1));
    require_pd(&sigma_u, "sigma_u")?;
    let theta_spectral_radius = spectral_radius(&theta)?;
    let r = ReducedParams::new(theta, sigma_u)?;
    Ok((
        r,
        RecoveryDiagnostics {
            complex_roots: sol.complex_roots,
            sigma_u_asymmetry,
            theta_spectral_radius,
        },
    ))
}

/// Row-major flat arrays keyed by name, with the dimension alongside.
mod json {
    use super::*;

    fn to_flat(m: &Matrix) -> Vec<f64> {
        m.transpose().iter().copied().collect()
    }

    fn from_flat(n: usize, v: &[f64], field: &str) -> Result<Matrix, String> {
        if n == 0 {
            return Err("\"n\" must be at least 1".into());
        }
        if v.len() != n * n {
            return Err(format!(
                "field \"{field}\" has {} entries, expected n*n = {}",
                v.len(),
                n * n
            ));
        }
        Ok(Matrix::from_row_slice(n, n, v))
    }

    macro_rules! pair_json {
        ($json:ident, $ty:ident, $a:ident, $b:ident) => {
            #[derive(Serialize, Deserialize)]
            #[serde(deny_unknown_fields)]
            pub struct $json {
                n: usize,
                $a: Vec<f64>,
                $b: Vec<f64>,
            }

            impl From<$ty> for $json {
                fn from(p: $ty) -> Self {
                    $json {
                        n: p.$a.nrows(),
                        $a: to_flat(&p.$a),
                        $b: to_flat(&p.$b),
                    }
                }
            }

            impl TryFrom<$json> for $ty {
                type Error = String;
                fn try_from(j: $json) -> Result<Self, String> {
                    let $a = from_flat(j.n, &j.$a, stringify!($a))?;
                    let $b = from_flat(j.n, &j.$b, stringify!($b))?;
                    $ty::new($a, $b).map_err(|e| e.to_string())
                }
            }
        };
    }

    pair_json!(StructuralJson, StructuralParams, sigma_eta, sigma_eps);
    pair_json!(ReducedJson, ReducedParams, theta, sigma_u);
    pair_json!(AutocovJson, AutocovPair, gamma0, gamma1);
}

/// Row-major flattening used by every JSON and CSV surface of the crate.
pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
