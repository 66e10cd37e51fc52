//! Eigendecomposition-based matrix functions.
//!
//! Everything here works on small dense matrices (N is the number of series,
//! typically below ten), so clarity wins over blocked algorithms. Eigenvalues
//! come from nalgebra's real Schur form; eigenvectors are recovered as null
//! vectors of `A - λI` through a complex SVD, one cluster of (numerically)
//! equal eigenvalues at a time so that semisimple repeated eigenvalues get a
//! full basis.

use nalgebra::{Complex, DMatrix, Schur, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance below which an imaginary part is treated as round-off.
pub const IMAG_TOL: f64 = 1e-8;

const SCHUR_MAX_ITER: usize = 10_000;

/// Right eigenvectors and eigenvalues of a real square matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    /// Columns are unit-norm right eigenvectors, in the order of `values`.
    pub vectors: CMatrix,
    /// Ratio of extreme singular values of `vectors` (∞ if singular).
    pub condition_estimate: f64,
}

impl EigenDecomposition {
    /// `‖A V − V Λ‖_F / ‖A‖_F` for the matrix this decomposition came from.
    pub fn residual(&self, a: &Matrix) -> f64 {
        let ac = to_complex(a);
        let lhs = &ac * &self.vectors;
        let rhs = &self.vectors * CMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.values.clone()));
        let scale = a.norm().max(f64::MIN_POSITIVE);
        (lhs - rhs).norm() / scale
    }

    /// Rebuild `V diag(f(λ)) V⁻¹` and return its real part, failing if the
    /// imaginary residue is more than round-off.
    fn reassemble(&self, mapped: &[C64]) -> Result<Matrix> {
        let vinv = self
            .vectors
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { what: "eigenvector matrix" })?;
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(mapped));
        let full = &self.vectors * d * vinv;
        let re = full.map(|z| z.re);
        let im = full.map(|z| z.im);
        let scale = re.norm().max(f64::MIN_POSITIVE);
        if im.norm() > IMAG_TOL * scale {
            return Err(Error::Domain(format!(
                "matrix function has imaginary residue {:e} relative to its real part",
                im.norm() / scale
            )));
        }
        Ok(re)
    }
}

pub fn to_complex(a: &Matrix) -> CMatrix {
    a.map(|x| C64::new(x, 0.0))
}

pub(crate) fn check_square(a: &Matrix) -> Result<usize> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Invalid("empty matrix".into()));
    }
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("matrix has non-finite entries".into()));
    }
    Ok(n)
}

/// Eigenvalues and right eigenvectors of a real square matrix.
pub fn eig_decompose(a: &Matrix) -> Result<EigenDecomposition> {
    let n = check_square(a)?;
    let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::NonConvergence { dim: n })?;
    let values: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();

    let scale = a.norm().max(1.0);
    let cluster_tol = 1e-10 * scale;

    // group numerically equal eigenvalues, keeping first-appearance order
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match clusters
            .iter_mut()
            .find(|c| (values[c[0]] - v).norm() <= cluster_tol)
        {
            Some(c) => c.push(i),
            None => clusters.push(vec![i]),
        }
    }

    let ac = to_complex(a);
    let mut vectors = CMatrix::zeros(n, n);
    for cluster in &clusters {
        let k = cluster.len();
        let mean = cluster.iter().map(|&i| values[i]).sum::<C64>() / k as f64;
        let shifted = &ac - CMatrix::identity(n, n) * mean;
        let svd = SVD::try_new(shifted, false, true, f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or(Error::NonConvergence { dim: n })?;
        let v_t = svd.v_t.ok_or(Error::NonConvergence { dim: n })?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
        for (slot, &idx) in cluster.iter().zip(order.iter()) {
            let col = v_t.row(idx).transpose().map(|z| z.conj());
            let norm = col.norm();
            vectors.set_column(*slot, &(col / C64::new(norm, 0.0)));
        }
    }

    let sv = vectors.clone().singular_values();
    let (smax, smin) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let condition_estimate = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    Ok(EigenDecomposition {
        values,
        vectors,
        condition_estimate,
    })
}

/// True if `λ` is real within the module's tolerance and strictly positive.
fn is_positive_real(l: C64) -> bool {
    l.im.abs() <= IMAG_TOL * (1.0 + l.norm()) && l.re > 0.0
}

/// Principal square root of a diagonalizable matrix with real positive spectrum.
pub fn sqrt_via_eig(a: &Matrix) -> Result<Matrix> {
    let eig = eig_decompose(a)?;
    if let Some(bad) = eig.values.iter().find(|l| !is_positive_real(**l)) {
        return Err(Error::NotPositiveSpectrum {
            re: bad.re,
            im: bad.im,
        });
    }
    let roots: Vec<C64> = eig
        .values
        .iter()
        .map(|l| C64::new(l.re.sqrt(), 0.0))
        .collect();
    eig.reassemble(&roots)
}

/// Solution of `Θ² + AΘ + I = 0` with every eigenvalue inside the unit disk.
#[derive(Debug, Clone)]
pub struct ThetaSolution {
    pub theta: Matrix,
    /// Selected root per eigenvalue of `A`.
    pub roots: Vec<C64>,
    /// The paired root that was discarded (`roots[i] * rejected[i] == 1`).
    pub rejected: Vec<C64>,
    /// Set when some selected root has a non-negligible imaginary part.
    pub complex_roots: bool,
}

/// Roots of `g² + a g + 1 = 0`, ordered (inside, outside) by modulus.
///
/// The large root is formed without cancellation and the small one from the
/// product of the roots being one.
pub fn quadratic_roots(a: C64) -> (C64, C64) {
    let disc = (a * a - C64::new(4.0, 0.0)).sqrt();
    let big = if (a.conj() * disc).re >= 0.0 {
        (-a - disc) / 2.0
    } else {
        (-a + disc) / 2.0
    };
    let small = C64::new(1.0, 0.0) / big;
    (small, big)
}

pub fn solve_theta_quadratic(a: &Matrix) -> Result<ThetaSolution> {
    let eig = eig_decompose(a)?;
    let mut roots = Vec::with_capacity(eig.values.len());
    let mut rejected = Vec::with_capacity(eig.values.len());
    let mut complex_roots = false;
    for &ev in &eig.values {
        let (inner, outer) = quadratic_roots(ev);
        if inner.norm() >= 1.0 - 1e-12 {
            return Err(Error::NoInvertibleRoot { re: ev.re, im: ev.im });
        }
        if inner.im.abs() > IMAG_TOL * (1.0 + inner.norm()) {
            complex_roots = true;
        }
        roots.push(inner);
        rejected.push(outer);
    }
    let theta = eig.reassemble(&roots)?;
    Ok(ThetaSolution {
        theta,
        roots,
        rejected,
        complex_roots,
    })
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    let n = check_square(a)?;
    let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::NonConvergence { dim: n })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// `(M + Mᵀ)/2` together with `‖M − Mᵀ‖_F / (2‖M‖_F)`.
pub fn symmetrize(m: &Matrix) -> (Matrix, f64) {
    let t = m.transpose();
    let asym = (m - &t).norm() / 2.0;
    let scale = m.norm();
    let rel = if scale > 0.0 { asym / scale } else { 0.0 };
    ((m + t) * 0.5, rel)
}

pub fn relative_asymmetry(m: &Matrix) -> f64 {
    symmetrize(m).1
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &Matrix) -> f64 {
    let (s, _) = symmetrize(m);
    SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Scale-aware positive-definiteness test: `λ_min > 1e-12 · trace / N`.
pub fn is_positive_definite(m: &Matrix) -> bool {
    pd_margin(m).is_ok()
}

pub(crate) fn pd_margin(m: &Matrix) -> Result<(), f64> {
    let n = m.nrows() as f64;
    let lmin = min_symmetric_eigenvalue(m);
    let threshold = 1e-12 * (m.trace() / n).abs();
    if lmin.is_finite() && lmin > threshold && lmin > 0.0 {
        Ok(())
    } else {
        Err(lmin)
    }
}

pub(crate) fn require_pd(m: &Matrix, what: &'static str) -> Result<()> {
    pd_margin(m).map_err(|min_eigenvalue| Error::NotPositiveDefinite { what, min_eigenvalue })
}

/// Inverse with a relative reciprocal-condition guard.
pub(crate) fn checked_inverse(m: &Matrix, what: &'static str) -> Result<Matrix> {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smax > 0.0) || smin <= 1e-12 * smax {
        return Err(Error::Singular { what });
    }
    m.clone().try_inverse().ok_or(Error::Singular { what })
}
