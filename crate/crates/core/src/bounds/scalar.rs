//! Scalar figures of merit built from a Fisher matrix.

use nalgebra::DVector;
use serde::Serialize;

use super::fisher::FisherMatrix;
use crate::error::{Error, Result};
use crate::linalg::max_abs_real;
use crate::operator::WeightMatrix;
use crate::scalar::{RMatrix, Real};
use crate::tolerance::{self, scaled};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarBound<T> {
    /// `Tr[W F⁺]/m`.
    pub value: T,
    /// W has weight outside the support of F, so the true bound is infinite.
    pub inestimable: bool,
}

fn check_repetitions(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput("repetitions must be positive".into()));
    }
    Ok(())
}

/// `‖(I−Π) W (I−Π)‖_max` relative to `‖W‖_max`.
pub fn kernel_weight<T: Real>(f: &FisherMatrix<T>, w: &RMatrix<T>) -> T {
    let d = f.dim();
    let q = RMatrix::<T>::identity(d, d) - f.support();
    let leak = max_abs_real(&(&q * w * &q));
    let scale = max_abs_real(w);
    if scale == T::zero() {
        T::zero()
    } else {
        leak / scale
    }
}

pub fn scalar_bound<T: Real>(
    f: &FisherMatrix<T>,
    w: &WeightMatrix<T>,
    m: usize,
    strict: bool,
) -> Result<ScalarBound<T>> {
    check_repetitions(m)?;
    if f.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            what: "weight matrix",
            expected: f.dim(),
            found: w.dim(),
        });
    }
    let inestimable = kernel_weight(f, w.matrix()) > scaled::<T>(tolerance::SATURATION);
    if inestimable && strict {
        return Err(Error::Inestimable);
    }
    let value = (w.matrix() * f.pinv()).trace() / T::lit(m as f64);
    Ok(ScalarBound { value, inestimable })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakBound<T> {
    /// `(νᵀν)² / (m νᵀFν)`.
    pub weak: T,
    /// `νᵀF⁺ν / m`.
    pub exact: T,
    /// `exact − weak`.
    pub gap: T,
    pub inestimable: bool,
}

pub fn weak_qcrb<T: Real>(nu: &[T], f: &FisherMatrix<T>, m: usize) -> Result<WeakBound<T>> {
    check_repetitions(m)?;
    if nu.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            what: "direction",
            expected: f.dim(),
            found: nu.len(),
        });
    }
    let v = DVector::from_column_slice(nu);
    let nn = v.dot(&v);
    if nn == T::zero() {
        return Err(Error::ZeroVector);
    }
    let fv = (v.transpose() * f.matrix() * &v)[(0, 0)];
    if fv <= scaled::<T>(tolerance::RANK) * f.max_eigenvalue().max(T::zero()) * nn || fv <= T::zero() {
        return Err(Error::Unbounded);
    }
    let mm = T::lit(m as f64);
    let weak = nn * nn / (mm * fv);
    let exact = (v.transpose() * f.pinv() * &v)[(0, 0)] / mm;
    let kernel = f.kernel_component(&v).norm() / nn.sqrt();
    Ok(WeakBound {
        weak,
        exact,
        gap: exact - weak,
        inestimable: kernel > scaled::<T>(tolerance::SATURATION),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightAnalysis<T> {
    /// `Σ_j w_j ν_jᵀ F⁺ ν_j / m = Tr[W F⁺]/m`.
    pub trace_bound: T,
    /// `Σ_j w_j (ν_jᵀν_j)² / (m ν_jᵀ F ν_j)`, termwise weak bounds.
    pub weak_sum: T,
    /// `n² [Σ_j m ν_jᵀFν_j / (w_j (ν_jᵀν_j)²)]⁻¹` over the `n` directions.
    pub harmonic_bound: T,
    /// Least-squares λ in `W ≈ λF`.
    pub lambda: T,
    /// `‖W − λF‖_F / ‖W‖_F`.
    pub residual: T,
    /// `Tr[W_opt F⁺]/m = λ·rank(F)/m` for `W_opt = λF`.
    pub optimal_value: T,
}

/// Compares `W = Σ_j w_j ν_j ν_jᵀ` with the optimal weight `λF`.
///
/// Cauchy–Schwarz gives `(νᵀν)²/(νᵀFν) ≤ νᵀF⁻¹ν` termwise and the
/// arithmetic–harmonic inequality bounds the sum of the weak terms from
/// below, so `harmonic ≤ weak_sum ≤ trace_bound`.
pub fn weight_matrix_analysis<T: Real>(
    f: &FisherMatrix<T>,
    directions: &[(T, Vec<T>)],
    m: usize,
) -> Result<WeightAnalysis<T>> {
    check_repetitions(m)?;
    if directions.is_empty() {
        return Err(Error::InvalidWeight("no directions".into()));
    }
    let d = f.dim();
    let (ws, nus): (Vec<T>, Vec<Vec<T>>) = directions.iter().cloned().unzip();
    let w = WeightMatrix::from_directions(&ws, &nus)?;
    if w.dim() != d {
        return Err(Error::DimensionMismatch {
            what: "weight matrix",
            expected: d,
            found: w.dim(),
        });
    }
    if !w.is_positive_definite() {
        return Err(Error::SingularWeight);
    }
    let mm = T::lit(m as f64);
    let fp = f.pinv();
    let mut trace_bound = T::zero();
    let mut weak_sum = T::zero();
    let mut harmonic_den = T::zero();
    for (wj, nu) in &directions
        .iter()
        .map(|(w, n)| (*w, DVector::from_column_slice(n)))
        .collect::<Vec<_>>()
    {
        let nn = nu.dot(nu);
        if nn == T::zero() || *wj <= T::zero() {
            return Err(Error::SingularWeight);
        }
        let fv = (nu.transpose() * f.matrix() * nu)[(0, 0)];
        if fv <= T::zero() {
            return Err(Error::Unbounded);
        }
        trace_bound += *wj * (nu.transpose() * &fp * nu)[(0, 0)] / mm;
        weak_sum += *wj * nn * nn / (mm * fv);
        harmonic_den += mm * fv / (*wj * nn * nn);
    }
    let n = T::lit(directions.len() as f64);
    let harmonic_bound = n * n / harmonic_den;

    let fm = f.matrix();
    let ff = fm.dot(fm);
    let lambda = if ff > T::zero() {
        w.matrix().dot(fm) / ff
    } else {
        T::zero()
    };
    let wn = w.matrix().norm();
    let residual = (w.matrix() - fm * lambda).norm() / wn;
    Ok(WeightAnalysis {
        trace_bound,
        weak_sum,
        harmonic_bound,
        lambda,
        residual,
        optimal_value: lambda * T::lit(f.rank() as f64) / mm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::FisherSource;

    fn diag(v: &[f64]) -> FisherMatrix<f64> {
        FisherMatrix::new(
            RMatrix::from_diagonal(&DVector::from_column_slice(v)),
            FisherSource::Quantum,
        )
        .unwrap()
    }

    #[test]
    fn scalar_bound_diagonal() {
        let b = scalar_bound(&diag(&[2.0, 5.0]), &WeightMatrix::identity(2), 3, true).unwrap();
        assert!((b.value - (0.5 + 0.2) / 3.0).abs() < 1e-15);
        assert!(!b.inestimable);
    }

    #[test]
    fn weak_bound_two_by_two() {
        let w = weak_qcrb(&[1.0, 1.0], &diag(&[1.0, 4.0]), 1).unwrap();
        assert!((w.weak - 0.8).abs() < 1e-14);
        assert!((w.exact - 1.25).abs() < 1e-14);
        assert!(w.gap > 0.0);
        let w = weak_qcrb(&[0.0, 2.0], &diag(&[1.0, 4.0]), 2).unwrap();
        assert!(w.gap.abs() < 1e-12);
        assert_eq!(
            weak_qcrb(&[1.0, 0.0], &diag(&[0.0, 4.0]), 1).unwrap_err(),
            Error::Unbounded
        );
        assert_eq!(
            weak_qcrb(&[0.0, 0.0], &diag(&[1.0, 4.0]), 1).unwrap_err(),
            Error::ZeroVector
        );
    }

    #[test]
    fn weight_analysis_examples() {
        let f = diag(&[1.0, 4.0]);
        let a = weight_matrix_analysis(&f, &[(1.0, vec![1.0, 0.0]), (1.0, vec![0.0, 1.0])], 1).unwrap();
        assert!((a.trace_bound - 1.25).abs() < 1e-14);
        assert!((a.harmonic_bound - 0.8).abs() < 1e-14);
        assert!(a.harmonic_bound <= a.weak_sum + 1e-14 && a.weak_sum <= a.trace_bound + 1e-14);

        let eye = diag(&[1.0, 1.0, 1.0]);
        let dirs: Vec<_> = (0..3)
            .map(|k| (1.0, (0..3).map(|i| if i == k { 1.0 } else { 0.0 }).collect()))
            .collect();
        let a = weight_matrix_analysis(&eye, &dirs, 1).unwrap();
        assert!((a.trace_bound - 3.0).abs() < 1e-14);
        assert!((a.optimal_value - 3.0).abs() < 1e-14);
        assert!(a.residual < 1e-14);

        // W = λF along F's eigenvectors: everything coincides.
        let a = weight_matrix_analysis(&f, &[(2.0, vec![1.0, 0.0]), (8.0, vec![0.0, 1.0])], 1).unwrap();
        assert!((a.lambda - 2.0).abs() < 1e-14 && a.residual < 1e-14);
        assert!((a.trace_bound - 4.0).abs() < 1e-14);
        assert!((a.harmonic_bound - 4.0).abs() < 1e-14);
        assert!((a.optimal_value - 4.0).abs() < 1e-14);

        assert_eq!(
            weight_matrix_analysis(&f, &[(1.0, vec![1.0, 1.0]), (1.0, vec![2.0, 2.0])], 1).unwrap_err(),
            Error::SingularWeight
        );
    }
}
