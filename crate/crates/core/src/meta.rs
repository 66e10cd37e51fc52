//! Moment estimation through aggregation.
//!
//! The `N(N+1)/2` aggregates `wᵀz_t` with `w ∈ {e_i} ∪ {e_i + e_j, i < j}` are
//! each fitted as a scalar MA(1). Their implied autocovariances `γ_k^{(w)} =
//! wᵀΓ_k w` determine `Γ₀` and `Γ₁` entrywise (both are symmetric), and the
//! reduced parameters follow in closed form from the autocovariances.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result, Stage};
use crate::linalg::{is_positive_definite, symmetrize, Matrix};
use crate::model::{
    autocov_to_reduced_detailed, matrix_to_rows, reduced_to_structural_unchecked, AutocovPair,
    ReducedParams, StructuralParams,
};
use crate::scalar::{self, ScalarFit, ScalarSeries};
use crate::series::{SeriesKind, SeriesMatrix};

/// Shortest sample accepted by the multivariate estimators.
pub const MIN_SAMPLE: usize = 20;

/// One canonical aggregation vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    /// `e_i`
    Unit(usize),
    /// `e_i + e_j`, `i < j`
    Pair(usize, usize),
}

impl Weight {
    pub fn to_vector(self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        match self {
            Weight::Unit(i) => w[i] = 1.0,
            Weight::Pair(i, j) => {
                w[i] = 1.0;
                w[j] = 1.0;
            }
        }
        w
    }

    /// `wᵀz` without forming `w`.
    #[inline]
    pub fn apply(self, z: &[f64]) -> f64 {
        match self {
            Weight::Unit(i) => z[i],
            Weight::Pair(i, j) => z[i] + z[j],
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Unit(i) => write!(f, "e{}", i + 1),
            Weight::Pair(i, j) => write!(f, "e{}+e{}", i + 1, j + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightSet {
    n: usize,
    weights: Vec<Weight>,
}

impl WeightSet {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// All unit vectors first, then pairs in lexicographic `(i, j)` order.
pub fn canonical_weights(n: usize) -> WeightSet {
    let mut weights: Vec<Weight> = (0..n).map(Weight::Unit).collect();
    for i in 0..n {
        for j in i + 1..n {
            weights.push(Weight::Pair(i, j));
        }
    }
    WeightSet { n, weights }
}

/// `x_t = wᵀz_t`.
pub fn aggregate(z: &SeriesMatrix, w: &[f64]) -> Result<ScalarSeries> {
    if w.len() != z.cols() {
        return Err(Error::DimensionMismatch {
            expected: z.cols(),
            got: w.len(),
        });
    }
    let x = z
        .row_iter()
        .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum())
        .collect();
    ScalarSeries::new(x)
}

fn aggregate_weight(z: &SeriesMatrix, w: Weight) -> Result<ScalarSeries> {
    ScalarSeries::new(z.row_iter().map(|row| w.apply(row)).collect())
}

/// Lag-0 and lag-1 autocovariances of one aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateMoments {
    pub gamma0: f64,
    pub gamma1: f64,
}

/// Rebuilds `Γ₀`, `Γ₁` from aggregate autocovariances:
/// diagonal entries from `e_i`, off-diagonal ones as
/// `½(γ^{(e_i+e_j)} − γ^{(e_i)} − γ^{(e_j)})`.
pub fn assemble_autocov(moments: &BTreeMap<Weight, AggregateMoments>, n: usize) -> Result<AutocovPair> {
    let get = |w: Weight| moments.get(&w).copied().ok_or_else(|| Error::MissingWeight(w.to_string()));
    let mut g0 = Matrix::zeros(n, n);
    let mut g1 = Matrix::zeros(n, n);
    for i in 0..n {
        let m = get(Weight::Unit(i))?;
        g0[(i, i)] = m.gamma0;
        g1[(i, i)] = m.gamma1;
    }
    for i in 0..n {
        for j in i + 1..n {
            let m = get(Weight::Pair(i, j))?;
            let c0 = 0.5 * (m.gamma0 - g0[(i, i)] - g0[(j, j)]);
            let c1 = 0.5 * (m.gamma1 - g1[(i, i)] - g1[(j, j)]);
            g0[(i, j)] = c0;
            g0[(j, i)] = c0;
            g1[(i, j)] = c1;
            g1[(j, i)] = c1;
        }
    }
    Ok(AutocovPair { gamma0: g0, gamma1: g1 })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightFit {
    pub weight: Weight,
    #[serde(flatten)]
    pub fit: ScalarFit,
    pub moments: AggregateMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaDiagnostics {
    /// Weights whose scalar fit piled up at the invertibility boundary.
    pub boundary_weights: Vec<String>,
    /// Relative asymmetry of `−Θ̂⁻¹Γ̂₁` before symmetrization.
    pub sigma_u_asymmetry: f64,
    /// Relative asymmetry of `Θ̂Σ̂_u` before symmetrization.
    pub sigma_eps_asymmetry: f64,
    /// Some eigenvalue of `Θ̂` came from a complex root of the matrix quadratic.
    pub complex_roots: bool,
    pub theta_spectral_radius: f64,
    /// `Σ̂_η` and `Σ̂_ε` are both positive definite.
    pub structural_valid: bool,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetaFitReport {
    #[serde(serialize_with = "ser_reduced")]
    pub reduced: ReducedParams,
    /// May be indefinite; see `diagnostics.structural_valid`.
    #[serde(serialize_with = "ser_structural")]
    pub structural: StructuralParams,
    pub per_weight: Vec<WeightFit>,
    #[serde(serialize_with = "ser_autocov")]
    pub autocov: AutocovPair,
    pub diagnostics: MetaDiagnostics,
}

fn ser_pair<S: serde::Serializer>(s: S, a: (&str, &Matrix), b: (&str, &Matrix)) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut m = s.serialize_map(Some(2))?;
    m.serialize_entry(a.0, &matrix_to_rows(a.1))?;
    m.serialize_entry(b.0, &matrix_to_rows(b.1))?;
    m.end()
}

pub(crate) fn ser_reduced<S: serde::Serializer>(r: &ReducedParams, s: S) -> Result<S::Ok, S::Error> {
    ser_pair(s, ("theta", &r.theta), ("sigma_u", &r.sigma_u))
}

fn ser_structural<S: serde::Serializer>(p: &StructuralParams, s: S) -> Result<S::Ok, S::Error> {
    ser_pair(s, ("sigma_eta", &p.sigma_eta), ("sigma_eps", &p.sigma_eps))
}

fn ser_autocov<S: serde::Serializer>(a: &AutocovPair, s: S) -> Result<S::Ok, S::Error> {
    ser_pair(s, ("gamma0", &a.gamma0), ("gamma1", &a.gamma1))
}

fn check_differences(z: &SeriesMatrix) -> Result<()> {
    z.require_kind(SeriesKind::Differences)?;
    if z.rows() < MIN_SAMPLE {
        return Err(Error::Invalid(format!(
            "need at least {MIN_SAMPLE} differenced observations, got {}",
            z.rows()
        )));
    }
    Ok(())
}

/// Runs the aggregation estimator on differenced data.
///
/// The scalar fits run in parallel; results are collected in canonical
/// weight order, so the report is identical across runs apart from
/// `elapsed_seconds`.
pub fn meta_fit(z: &SeriesMatrix) -> Result<MetaFitReport> {
    let start = Instant::now();
    check_differences(z)?;
    let n = z.cols();
    let weights = canonical_weights(n);

    let per_weight: Vec<WeightFit> = weights
        .weights()
        .par_iter()
        .map(|&w| {
            let fit = scalar::fit(&aggregate_weight(z, w)?)?;
            let (gamma0, gamma1) = scalar::moments_from_params(&fit.params);
            Ok(WeightFit {
                weight: w,
                fit,
                moments: AggregateMoments { gamma0, gamma1 },
            })
        })
        .collect::<Result<_>>()
        .map_err(|e| e.at(Stage::ScalarFit))?;

    let moments: BTreeMap<Weight, AggregateMoments> =
        per_weight.iter().map(|f| (f.weight, f.moments)).collect();
    let autocov = assemble_autocov(&moments, n).map_err(|e| e.at(Stage::Assembly))?;
    let (reduced, rec) = autocov_to_reduced_detailed(&autocov).map_err(|e| e.at(Stage::Recovery))?;

    let (_, sigma_eps_asymmetry) = symmetrize(&(&reduced.theta * &reduced.sigma_u));
    let structural = reduced_to_structural_unchecked(&reduced);
    let structural_valid =
        is_positive_definite(&structural.sigma_eta) && is_positive_definite(&structural.sigma_eps);

    let diagnostics = MetaDiagnostics {
        boundary_weights: per_weight
            .iter()
            .filter(|f| f.fit.boundary)
            .map(|f| f.weight.to_string())
            .collect(),
        sigma_u_asymmetry: rec.sigma_u_asymmetry,
        sigma_eps_asymmetry,
        complex_roots: rec.complex_roots,
        theta_spectral_radius: rec.theta_spectral_radius,
        structural_valid,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(MetaFitReport {
        reduced,
        structural,
        per_weight,
        autocov,
        diagnostics,
    })
}

/// Sample lag-0 and (symmetrized) lag-1 autocovariances, both scaled by `1/T`.
pub fn sample_autocov(z: &SeriesMatrix) -> (Matrix, Matrix) {
    let n = z.cols();
    let t = z.rows() as f64;
    let mut g0 = Matrix::zeros(n, n);
    let mut g1 = Matrix::zeros(n, n);
    let mut prev: Option<&[f64]> = None;
    for row in z.row_iter() {
        for i in 0..n {
            for j in 0..n {
                g0[(i, j)] += row[i] * row[j];
                if let Some(p) = prev {
                    g1[(i, j)] += row[i] * p[j];
                }
            }
        }
        prev = Some(row);
    }
    g0 /= t;
    g1 /= t;
    let (g1, _) = symmetrize(&g1);
    (g0, g1)
}

/// Sample-moment estimator: plug the sample autocovariances into the
/// closed-form recovery.
pub fn mom_fit(z: &SeriesMatrix) -> Result<ReducedParams> {
    check_differences(z)?;
    let (gamma0, gamma1) = sample_autocov(z);
    let autocov = AutocovPair::new(gamma0, gamma1).map_err(|e| e.at(Stage::SampleMoments))?;
    autocov_to_reduced_detailed(&autocov)
        .map(|(r, _)| r)
        .map_err(|e| e.at(Stage::Recovery))
}
