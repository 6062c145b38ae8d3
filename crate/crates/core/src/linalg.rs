//! Dense complex linear algebra used throughout the crate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cr, modulus, CMatrix, RMatrix, RVector, Real};
use crate::tolerance::DIMENSION_CAP;

/// Sweep budget handed to the symmetric eigen-solver.
pub const EIGEN_MAX_ITERATIONS: usize = 10_000;

/// Eigen-decomposition with eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    pub values: RVector<T>,
    /// Columns are the orthonormal eigenvectors.
    pub vectors: CMatrix<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_abs_value(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `U f(Λ) U†`.
    pub fn map(&self, f: impl Fn(T) -> T) -> CMatrix<T> {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = cr(f(self.values[j]));
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        scaled * self.vectors.adjoint()
    }

    /// `U f(Λ) U†` for a complex-valued spectral function.
    pub fn map_complex(&self, f: impl Fn(T) -> Complex<T>) -> CMatrix<T> {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix<T> {
        self.map(|x| x)
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn spectral_decomposition<T: Real>(h: &CMatrix<T>) -> Result<Spectrum<T>> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::DimensionMismatch {
            what: "spectral decomposition (square)",
            expected: n,
            found: h.ncols(),
        });
    }
    if n == 0 {
        return Ok(Spectrum {
            values: RVector::zeros(0),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    // Symmetrise so that the solver sees an exactly Hermitian input.
    let sym = (h + h.adjoint()) * cr(T::lit(0.5));
    let eig =
        SymmetricEigen::try_new(sym, T::machine_eps(), EIGEN_MAX_ITERATIONS).ok_or(Error::EigenNonConvergence {
            max_iterations: EIGEN_MAX_ITERATIONS,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = RVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Spectrum { values, vectors })
}

/// Real symmetric eigen-decomposition, eigenvalues ascending.
pub fn symmetric_eigen<T: Real>(m: &RMatrix<T>) -> Result<(RVector<T>, RMatrix<T>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((RVector::zeros(0), RMatrix::zeros(0, 0)));
    }
    let sym = (m + m.transpose()) * T::lit(0.5);
    let eig =
        SymmetricEigen::try_new(sym, T::machine_eps(), EIGEN_MAX_ITERATIONS).ok_or(Error::EigenNonConvergence {
            max_iterations: EIGEN_MAX_ITERATIONS,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = RVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = RMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Kronecker product `a ⊗ b`, rejected when the result exceeds `cap`.
pub fn kron_capped<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>, cap: usize) -> Result<CMatrix<T>> {
    let rows = a
        .nrows()
        .checked_mul(b.nrows())
        .ok_or(Error::DimensionCap { dim: usize::MAX, cap })?;
    let cols = a
        .ncols()
        .checked_mul(b.ncols())
        .ok_or(Error::DimensionCap { dim: usize::MAX, cap })?;
    let dim = rows.max(cols);
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    Ok(a.kronecker(b))
}

/// Kronecker product with the default cap.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<CMatrix<T>> {
    kron_capped(a, b, DIMENSION_CAP)
}

pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(modulus(*z)))
}

pub fn max_abs_real<T: Real>(m: &RMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.abs()))
}

/// `max |h - h†|` divided by `max |h|` (zero for the zero matrix).
pub fn hermiticity_deviation<T: Real>(h: &CMatrix<T>) -> T {
    let scale = max_abs(h);
    if scale == T::zero() {
        return T::zero();
    }
    max_abs(&(h - h.adjoint())) / scale
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

pub fn anticommutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b + b * a
}

/// `Tr[a b]` without forming the product.
pub fn trace_product<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Complex<T> {
    let n = a.nrows();
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn to_complex<T: Real>(m: &RMatrix<T>) -> CMatrix<T> {
    m.map(cr)
}

pub fn real_part<T: Real>(m: &CMatrix<T>) -> RMatrix<T> {
    m.map(|z| z.re)
}

/// Principal square root of a PSD matrix, negative eigenvalues clamped to zero.
pub fn psd_sqrt<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    let s = spectral_decomposition(m)?;
    Ok(s.map(|x| if x > T::zero() { x.sqrt() } else { T::zero() }))
}

/// Real PSD square root.
pub fn psd_sqrt_real<T: Real>(m: &RMatrix<T>) -> Result<RMatrix<T>> {
    let (vals, vecs) = symmetric_eigen(m)?;
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = if vals[j] > T::zero() { vals[j].sqrt() } else { T::zero() };
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    Ok(scaled * vecs.transpose())
}

/// Symmetric pseudo-inverse with eigenvalues below `rel_tol * λ_max` discarded.
/// Returns the inverse and the retained rank.
pub fn symmetric_pinv<T: Real>(m: &RMatrix<T>, rel_tol: T) -> Result<(RMatrix<T>, usize)> {
    let (vals, vecs) = symmetric_eigen(m)?;
    let n = vals.len();
    let lmax = vals.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let mut out = RMatrix::zeros(n, n);
    if lmax == T::zero() {
        return Ok((out, 0));
    }
    let cut = rel_tol * lmax;
    let mut rank = 0;
    for j in 0..n {
        if vals[j] > cut {
            rank += 1;
            let v = vecs.column(j);
            out += (v * v.transpose()) / vals[j];
        }
    }
    Ok((out, rank))
}

/// Real embedding `[[Re H, −Im H], [Im H, Re H]]` of a complex matrix.
fn real_embedding<T: Real>(h: &CMatrix<T>) -> RMatrix<T> {
    let n = h.nrows();
    RMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Checked Cholesky of a Hermitian matrix, returning `log det H` and `H⁻¹`, or
/// `None` unless `H` is positive definite.
///
/// nalgebra's complex Cholesky takes complex square roots of the pivots and so
/// never rejects indefinite input; the real embedding has the same spectrum
/// (doubled) and a pivot check that works.
pub fn hermitian_pd_inverse<T: Real>(h: &CMatrix<T>) -> Option<(T, CMatrix<T>)> {
    let n = h.nrows();
    let sym = (h + h.adjoint()) * cr(T::lit(0.5));
    let chol = real_embedding(&sym).cholesky()?;
    let l = chol.l_dirty();
    let mut logdet = T::zero();
    for i in 0..2 * n {
        let p = l[(i, i)];
        if !(p > T::zero()) {
            return None;
        }
        logdet += p.ln();
    }
    let inv = chol.inverse();
    let out = CMatrix::from_fn(n, n, |i, j| Complex::new(inv[(i, j)], inv[(i + n, j)]));
    Some((logdet, out))
}

/// Builds a complex matrix from nested `(re, im)` pairs.
pub fn complex_from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<DMatrix<Complex<f64>>> {
    let n = rows.len();
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidInput("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| {
        Complex::new(rows[i][j][0], rows[i][j][1])
    }))
}

/// Nested `(re, im)` pairs of a complex matrix, row-major.
pub fn complex_to_pairs(m: &DMatrix<Complex<f64>>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn real_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidInput("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn real_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn vector_to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli;

    #[test]
    fn identity_kron_identity() {
        let i2 = identity::<f64>(2);
        assert_eq!(kron(&i2, &i2).unwrap(), identity::<f64>(4));
    }

    #[test]
    fn diagonal_kron() {
        let a = to_complex(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])));
        let b = to_complex(&DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])));
        let expected = to_complex(&DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0])));
        assert_eq!(kron(&a, &b).unwrap(), expected);
    }

    #[test]
    fn kron_of_commuting_factors() {
        let z = pauli::z::<f64>();
        let i = identity::<f64>(2);
        let lhs = kron(&z, &i).unwrap() * kron(&i, &z).unwrap();
        let rhs = kron(&z, &z).unwrap();
        assert!(max_abs(&(lhs - rhs)) < 1e-15);
    }

    #[test]
    fn kron_cap_is_enforced() {
        let a = identity::<f64>(32);
        let err = kron_capped(&a, &a, 512).unwrap_err();
        assert_eq!(err, Error::DimensionCap { dim: 1024, cap: 512 });
        assert!(err.to_string().contains("512"));
    }

    #[test]
    fn pauli_z_spectrum() {
        let s = spectral_decomposition(&pauli::z::<f64>()).unwrap();
        assert!((s.values[0] + 1.0).abs() < 1e-14);
        assert!((s.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_spectrum() {
        let s = spectral_decomposition(&identity::<f64>(5)).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let u = &s.vectors;
        assert!(max_abs(&(u.adjoint() * u - identity(5))) < 1e-12);
    }

    #[test]
    fn pinv_drops_small_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (p, rank) = symmetric_pinv(&m, 1e-10).unwrap();
        assert_eq!(rank, 1);
        let back = &m * &p * &m;
        assert!(max_abs_real(&(back - m)) < 1e-12);
    }
}
