//! Dense Hermitian eigendecomposition and the matrix exponentials built on it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fock::C64;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 0; // 0 = until convergence

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    /// `V diag(f(lambda)) V^dagger`.
    pub fn map_spectrum<F>(&self, f: F) -> DMatrix<C64>
    where
        F: Fn(f64) -> C64,
    {
        let weights: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= weights[k];
        }
        scaled * self.vectors.adjoint()
    }

    /// `V diag(f(lambda)) V^dagger v` without forming the full matrix.
    pub fn apply_spectrum<F>(&self, v: &DVector<C64>, f: F) -> DVector<C64>
    where
        F: Fn(f64) -> C64,
    {
        let mut coeffs = self.vectors.ad_mul(v);
        for (c, &l) in coeffs.iter_mut().zip(&self.values) {
            *c *= f(l);
        }
        &self.vectors * coeffs
    }
}

/// Eigendecomposition of a Hermitian matrix. Uses the real symmetric solver
/// when the matrix has no imaginary part.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> Result<HermitianEigen> {
    let n = m.nrows();
    let (values, vectors): (Vec<f64>, DMatrix<C64>) = if m.iter().all(|z| z.im == 0.0) {
        let real = m.map(|z| z.re);
        let eig = SymmetricEigen::try_new(real, EIGEN_EPS, EIGEN_MAX_ITER)
            .ok_or_else(|| Error::Overflow("symmetric eigensolver did not converge".into()))?;
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| C64::new(x, 0.0)),
        )
    } else {
        let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
            .ok_or_else(|| Error::Overflow("Hermitian eigensolver did not converge".into()))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let sorted_vectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    Ok(HermitianEigen {
        values: sorted_values,
        vectors: sorted_vectors,
    })
}

/// Ascending eigenvalues only.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    let mut values: Vec<f64> = if m.iter().all(|z| z.im == 0.0) {
        m.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect()
    } else {
        m.clone().symmetric_eigenvalues().iter().copied().collect()
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("non-finite eigenvalue".into()));
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn is_diagonal(m: &DMatrix<C64>) -> bool {
    let n = m.nrows();
    (0..n).all(|c| (0..n).all(|r| r == c || (m[(r, c)].re == 0.0 && m[(r, c)].im == 0.0)))
}

/// `exp(scale * H)` for Hermitian `H` through its eigendecomposition.
/// Diagonal inputs are exponentiated entrywise, so their off-diagonal
/// entries stay exactly zero.
pub fn expm_hermitian(h: &DMatrix<C64>, scale: C64) -> Result<DMatrix<C64>> {
    if is_diagonal(h) {
        let d = DVector::from_iterator(h.nrows(), h.diagonal().iter().map(|&x| (scale * x).exp()));
        return Ok(DMatrix::from_diagonal(&d));
    }
    Ok(hermitian_eigen(h)?.map_spectrum(|l| (scale * l).exp()))
}

/// `exp(A)` by scaling and squaring of a shifted Taylor series.
///
/// The diagonal shift makes the scaled matrix entrywise non-negative whenever
/// `A` has non-negative real off-diagonal entries, so every term and every
/// squaring adds non-negative numbers: each entry is computed to full relative
/// precision however small it is, until it underflows.
pub fn expm_shifted_series(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|c| a.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm1 * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled = a.map(|z| z * scale);
    let shift = scaled.diagonal().iter().map(|z| z.re).fold(0.0, f64::min);
    let mut b = scaled;
    for i in 0..n {
        b[(i, i)] -= C64::new(shift, 0.0);
    }
    // exp(b) with b entrywise small; 30 terms reach far below f64 epsilon.
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = (&term * &b).map(|z| z / k as f64);
        sum += &term;
    }
    let mut result = sum.map(|z| z * shift.exp());
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `exp(A)` for nilpotent `A` (e.g. a multiple of a truncated ladder operator):
/// the series is summed until a term vanishes exactly.
pub fn expm_nilpotent(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=n {
        term = (&term * a).map(|z| z / k as f64);
        if term.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            return Ok(sum);
        }
        sum += &term;
    }
    if (&term * a).iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        Ok(sum)
    } else {
        Err(Error::DimensionMismatch("matrix is not nilpotent".into()))
    }
}
