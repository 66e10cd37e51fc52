//! Gaussian simulation of the structural model and the four reference presets.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), which produces the same
//! stream on every platform for a given 64-bit seed. Independent replications
//! use child seeds from [`child_seed`], a SplitMix64 fold over the master seed
//! and the replication coordinates.

use nalgebra::{Cholesky, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::StructuralParams;
use crate::series::{SeriesKind, SeriesMatrix};

#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub params: StructuralParams,
    /// Number of level observations.
    pub len: usize,
    pub seed: u64,
    /// Initial level `μ₀`; zero when `None`.
    pub mu0: Option<Vec<f64>>,
}

impl SimulationSpec {
    pub fn new(params: StructuralParams, len: usize, seed: u64) -> Self {
        SimulationSpec {
            params,
            len,
            seed,
            mu0: None,
        }
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic child seed for one coordinate tuple (e.g. model, T, replication).
pub fn child_seed(master: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

fn lower_factor(m: &Matrix, what: &'static str) -> Result<Matrix> {
    Cholesky::new(m.clone())
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite {
            what,
            min_eigenvalue: crate::linalg::min_symmetric_eigenvalue(m),
        })
}

/// Draws `len` level observations. At each step the `N` standard normals
/// for `η_t` are drawn before the `N` for `ε_t`.
pub fn simulate(spec: &SimulationSpec) -> Result<SeriesMatrix> {
    let p = &spec.params;
    p.validate()?;
    if spec.len < 2 {
        return Err(Error::Invalid(format!("need at least 2 observations, got {}", spec.len)));
    }
    let n = p.dim();
    let l_eta = lower_factor(&p.sigma_eta, "sigma_eta")?;
    let l_eps = lower_factor(&p.sigma_eps, "sigma_eps")?;
    let mut mu = match &spec.mu0 {
        Some(m) if m.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.len(),
            })
        }
        Some(m) => DVector::from_column_slice(m),
        None => DVector::zeros(n),
    };

    let mut rng = rng_from_seed(spec.seed);
    let mut draw = DVector::zeros(n);
    let mut data = Vec::with_capacity(spec.len * n);
    for _ in 0..spec.len {
        for x in draw.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        mu += &l_eta * &draw;
        for x in draw.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        let y = &mu + &l_eps * &draw;
        data.extend(y.iter());
    }
    SeriesMatrix::from_row_major(SeriesKind::Levels, n, data)
}

/// `z_t = y_t − y_{t−1}`; one row shorter than the input.
pub fn difference(levels: &SeriesMatrix) -> Result<SeriesMatrix> {
    levels.require_kind(SeriesKind::Levels)?;
    if levels.rows() < 2 {
        return Err(Error::Invalid("need at least 2 rows to difference".into()));
    }
    let n = levels.cols();
    let src = levels.as_slice();
    let data: Vec<f64> = src[n..].iter().zip(src).map(|(a, b)| a - b).collect();
    let names = levels
        .names()
        .iter()
        .enumerate()
        .map(|(i, name)| match name.strip_prefix('y') {
            Some(rest) => format!("z{rest}"),
            None => format!("z{}", i + 1),
        })
        .collect();
    SeriesMatrix::with_names(SeriesKind::Differences, names, data)
}

/// The four reference models: two bivariate, two trivariate, with the second
/// of each pair having a much noisier observation equation.
pub fn preset(model_id: u32) -> Result<StructuralParams> {
    let eta2 = [1.0, -0.5, -0.5, 1.5];
    let eta3 = [1.0, -0.5, 0.3, -0.5, 1.5, -0.2, 0.3, -0.2, 1.0];
    let (n, eta, eps): (usize, &[f64], &[f64]) = match model_id {
        1 => (2, &eta2, &[1.5, -0.15, -0.15, 1.0]),
        2 => (2, &eta2, &[30.0, -3.0, -3.0, 20.0]),
        3 => (3, &eta3, &[1.5, -0.15, -0.1, -0.15, 1.0, 0.3, -0.1, 0.3, 1.5]),
        4 => (3, &eta3, &[30.0, -3.0, -2.0, -3.0, 20.0, 6.0, -2.0, 6.0, 30.0]),
        other => return Err(Error::UnknownModel(other)),
    };
    StructuralParams::new(Matrix::from_row_slice(n, n, eta), Matrix::from_row_slice(n, n, eps))
}
