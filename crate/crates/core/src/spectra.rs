//! Empirical spectra: eigenvalues, singular values, the Hermitization and
//! the Stieltjes transform of symmetrized singular-value measures.

use ndarray::prelude::*;
use ndarray_linalg::{EigVals, Eigh, Norm, SVDDC, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Atoms of mass `1/n` on the real line, kept sorted; the CDF is an exact
/// step function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure1D {
    points: Vec<f64>,
}

impl EmpiricalMeasure1D {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySamples);
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Parameter("non-finite sample point".into()));
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(EmpiricalMeasure1D { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact step CDF: fraction of points `<= t`.
    pub fn cdf(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|&p| p <= t);
        idx as f64 / self.points.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// Atoms of mass `1/n` in the complex plane.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure2D {
    pub points: Vec<Complex64>,
}

impl EmpiricalMeasure2D {
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySamples);
        }
        Ok(EmpiricalMeasure2D { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

/// All eigenvalues with algebraic multiplicity, via the backend Schur-based
/// dense solver. Checks the trace identity before returning.
pub fn eigenvalues(m: &Array2<Complex64>) -> Result<EmpiricalMeasure2D> {
    let vals = m
        .eigvals()
        .map_err(|e| Error::backend(format!("eig of {}x{} matrix", m.nrows(), m.ncols()), e))?;
    let trace: Complex64 = m.diag().iter().sum();
    let sum: Complex64 = vals.iter().sum();
    let scale = m.norm_l2(); // Frobenius norm dominates the operator norm
    if (sum - trace).norm() > 1e-8 * m.nrows() as f64 * scale + 1e-12 {
        return Err(Error::Parameter(format!(
            "trace identity violated: |sum(eig) - tr| = {:.3e}",
            (sum - trace).norm()
        )));
    }
    EmpiricalMeasure2D::new(vals.to_vec())
}

/// The 2n x 2n Hermitian matrix `[[0, M - z], [(M - z)^*, 0]]` whose
/// spectrum is the symmetrized singular-value multiset of `M - z`.
pub fn hermitize(m: &Array2<Complex64>, z: Complex64) -> Array2<Complex64> {
    let n = m.nrows();
    let mut h = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let mut v = m[(i, j)];
            if i == j {
                v -= z;
            }
            h[(i, n + j)] = v;
            h[(n + j, i)] = v.conj();
        }
    }
    h
}

/// Eigenvalues of the Hermitization, ascending.
pub fn hermitization_eigenvalues(m: &Array2<Complex64>, z: Complex64) -> Result<Vec<f64>> {
    let h = hermitize(m, z);
    let vals = h
        .eigvalsh(UPLO::Lower)
        .map_err(|e| Error::backend("hermitization eigendecomposition", e))?;
    Ok(vals.to_vec())
}

fn shifted(m: &Array2<Complex64>, z: Complex64) -> Array2<Complex64> {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] -= z;
    }
    a
}

/// Singular values of `M - z` from the Hermitian eigenproblem of
/// `(M - z)^* (M - z)`; an n x n problem instead of the 2n x 2n
/// Hermitization, at the cost of absolute accuracy ~eps ||M - z||^2 / s on
/// the smallest values. Use [`singular_values_direct`] where tiny singular
/// values matter.
pub fn singular_values(m: &Array2<Complex64>, z: Complex64) -> Result<EmpiricalMeasure1D> {
    let a = shifted(m, z);
    let gram = a.t().mapv(|v| v.conj()).dot(&a);
    let vals = gram
        .eigvalsh(UPLO::Lower)
        .map_err(|e| Error::backend("gram eigendecomposition", e))?;
    EmpiricalMeasure1D::new(vals.iter().map(|&v| v.max(0.0).sqrt()).collect())
}

/// Singular values of `M - z` by a full SVD; accurate down to the least
/// singular value.
pub fn singular_values_direct(m: &Array2<Complex64>, z: Complex64) -> Result<EmpiricalMeasure1D> {
    let a = shifted(m, z);
    let (_, s, _) = a
        .svddc(ndarray_linalg::JobSvd::None)
        .map_err(|e| Error::backend("svd", e))?;
    EmpiricalMeasure1D::new(s.to_vec())
}

/// Symmetrization `{+/- s_i}`, each atom of mass `1/(2n)`.
pub fn symmetrize(nu: &EmpiricalMeasure1D) -> Result<EmpiricalMeasure1D> {
    if nu.points().iter().any(|&p| p < 0.0) {
        return Err(Error::Parameter("symmetrize requires nonnegative points".into()));
    }
    let mut points = Vec::with_capacity(2 * nu.len());
    for &p in nu.points() {
        points.push(-p);
        points.push(p);
    }
    EmpiricalMeasure1D::new(points)
}

/// Stieltjes transform of an atomic measure: `mean(1/(t_k - eta))` over the
/// atoms. Herglotz: maps the upper half-plane to itself.
pub fn stieltjes_of_empirical(nu_sym: &EmpiricalMeasure1D, eta: Complex64) -> Result<Complex64> {
    if eta.im <= 0.0 {
        return Err(Error::Parameter("Im(eta) must be positive".into()));
    }
    let sum: Complex64 = nu_sym
        .points()
        .iter()
        .map(|&t| (Complex64::new(t, 0.0) - eta).finv())
        .sum();
    Ok(sum / nu_sym.len() as f64)
}

/// Frobenius norm of `M - z`, for the sum-of-squares identity.
pub fn frobenius_shifted(m: &Array2<Complex64>, z: Complex64) -> f64 {
    shifted(m, z).norm_l2()
}
