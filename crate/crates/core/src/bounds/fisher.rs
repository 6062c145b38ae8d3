//! Fisher matrices, the classical FIM and Moore–Penrose pseudo-inverses.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{max_abs_real, symmetric_eigen};
use crate::model::{probability_jacobian, ParametricModel, ProbabilityVector};
use crate::operator::Povm;
use crate::scalar::{RMatrix, RVector, Real};
use crate::tolerance::{self, scaled};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherSource {
    Classical,
    Quantum,
}

/// Real symmetric PSD information matrix with its spectral data.
#[derive(Debug, Clone)]
pub struct FisherMatrix<T: Real> {
    matrix: RMatrix<T>,
    source: FisherSource,
    eigenvalues: RVector<T>,
    eigenvectors: RMatrix<T>,
    rank: usize,
    support: RMatrix<T>,
    excluded_mass: T,
}

impl<T: Real> FisherMatrix<T> {
    pub fn new(matrix: RMatrix<T>, source: FisherSource) -> Result<Self> {
        let d = matrix.nrows();
        if d != matrix.ncols() || d == 0 {
            return Err(Error::InvalidInput("Fisher matrix must be square and non-empty".into()));
        }
        let scale = max_abs_real(&matrix);
        let asym = max_abs_real(&(&matrix - matrix.transpose()));
        if asym > scaled::<T>(1e-10) * scale.max(T::one()) {
            return Err(Error::InvalidInput(format!(
                "Fisher matrix is not symmetric (deviation {})",
                asym.to_f64_lossy()
            )));
        }
        let matrix = (&matrix + matrix.transpose()) * T::lit(0.5);
        let (eigenvalues, eigenvectors) = symmetric_eigen(&matrix)?;
        let lmax = eigenvalues.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        if eigenvalues[0] < -scaled::<T>(1e-9) * lmax.max(T::one()) {
            return Err(Error::InvalidInput(format!(
                "Fisher matrix is not PSD (eigenvalue {})",
                eigenvalues[0].to_f64_lossy()
            )));
        }
        let cut = scaled::<T>(tolerance::RANK) * lmax;
        let mut support = RMatrix::zeros(d, d);
        let mut rank = 0;
        if lmax > T::zero() {
            for j in 0..d {
                if eigenvalues[j] > cut {
                    rank += 1;
                    let v = eigenvectors.column(j);
                    support += v * v.transpose();
                }
            }
        }
        Ok(Self {
            matrix,
            source,
            eigenvalues,
            eigenvectors,
            rank,
            support,
            excluded_mass: T::zero(),
        })
    }

    pub fn matrix(&self) -> &RMatrix<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn source(&self) -> FisherSource {
        self.source
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.dim()
    }

    /// Projector onto the span of the eigenvectors with non-negligible eigenvalues.
    pub fn support(&self) -> &RMatrix<T> {
        &self.support
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &RVector<T> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &RMatrix<T> {
        &self.eigenvectors
    }

    /// Probability mass of outcomes dropped below the floor (classical FIM only).
    pub fn excluded_mass(&self) -> T {
        self.excluded_mass
    }

    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues[self.dim() - 1]
    }

    /// Inverse on the support.
    pub fn pinv(&self) -> RMatrix<T> {
        let d = self.dim();
        let mut out = RMatrix::zeros(d, d);
        if self.rank == 0 {
            return out;
        }
        let cut = scaled::<T>(tolerance::RANK) * self.max_eigenvalue();
        for j in 0..d {
            if self.eigenvalues[j] > cut {
                let v = self.eigenvectors.column(j);
                out += (v * v.transpose()) / self.eigenvalues[j];
            }
        }
        out
    }

    /// `(I − Π) v`, the component of `v` the matrix cannot see.
    pub fn kernel_component(&self, v: &RVector<T>) -> RVector<T> {
        v - &self.support * v
    }

    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(&self.matrix * c, self.source)
    }
}

/// Moore–Penrose pseudo-inverse of a Fisher matrix.
#[derive(Debug, Clone)]
pub struct PseudoInverse<T: Real> {
    pub matrix: RMatrix<T>,
    pub rank: usize,
    /// Set when the input was the zero matrix.
    pub zero_input: bool,
}

pub fn pseudo_inverse<T: Real>(f: &FisherMatrix<T>) -> PseudoInverse<T> {
    PseudoInverse {
        matrix: f.pinv(),
        rank: f.rank(),
        zero_input: f.is_zero(),
    }
}

/// FIM from probabilities and their Jacobian `[k][j]`, dropping outcomes below `p_floor`.
pub fn fim_from_jacobian<T: Real>(p: &ProbabilityVector<T>, jac: &[Vec<T>], p_floor: T) -> Result<FisherMatrix<T>> {
    let d = jac.first().map(|r| r.len()).unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidInput("empty Jacobian".into()));
    }
    let mut f = RMatrix::zeros(d, d);
    let mut excluded = T::zero();
    let mut retained = 0usize;
    for (pk, grad) in p.values().iter().zip(jac) {
        if *pk < p_floor {
            excluded += *pk;
            continue;
        }
        retained += 1;
        let g = DVector::from_column_slice(grad);
        f += (&g * g.transpose()) / *pk;
    }
    if retained == 0 {
        return Err(Error::AllOutcomesBelowFloor);
    }
    let mut fm = FisherMatrix::new(f, FisherSource::Classical)?;
    fm.excluded_mass = excluded;
    Ok(fm)
}

/// `F_ij = Σ_k ∂_iP ∂_jP / P` over outcomes with `P ≥ p_floor`.
pub fn classical_fim<T: Real>(model: &ParametricModel<T>, povm: &Povm<T>, theta: &[T]) -> Result<FisherMatrix<T>> {
    classical_fim_with_floor(model, povm, theta, T::lit(tolerance::P_FLOOR))
}

pub fn classical_fim_with_floor<T: Real>(
    model: &ParametricModel<T>,
    povm: &Povm<T>,
    theta: &[T],
    p_floor: T,
) -> Result<FisherMatrix<T>> {
    let (p, jac) = probability_jacobian(model, povm, theta)?;
    fim_from_jacobian(&p, &jac, p_floor)
}

/// Top eigenvector (first non-zero component positive) and its eigenvalue.
/// Degenerate top eigenspaces resolve to the projection of the lowest-index
/// basis vector with non-zero overlap.
pub fn best_combination<T: Real>(f: &FisherMatrix<T>) -> Result<(RVector<T>, T)> {
    if f.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let d = f.dim();
    let lmax = f.max_eigenvalue();
    let tol = T::lit(1e-9) * lmax;
    let mut proj = RMatrix::zeros(d, d);
    for j in 0..d {
        if (f.eigenvalues[j] - lmax).abs() <= tol {
            let v = f.eigenvectors.column(j);
            proj += v * v.transpose();
        }
    }
    let mut chosen = None;
    for k in 0..d {
        let col = proj.column(k).into_owned();
        let n = col.norm();
        if n > T::lit(1e-6) {
            chosen = Some(col / n);
            break;
        }
    }
    let mut v = chosen.ok_or(Error::ZeroMatrix)?;
    if let Some(first) = v.iter().copied().find(|x| x.abs() > T::lit(1e-12)) {
        if first < T::zero() {
            v = -v;
        }
    }
    Ok((v, lmax))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[f64], d: usize) -> FisherMatrix<f64> {
        FisherMatrix::new(RMatrix::from_row_slice(d, d, rows), FisherSource::Quantum).unwrap()
    }

    #[test]
    fn diagonal_pinv() {
        let p = pseudo_inverse(&fm(&[4.0, 0.0, 0.0, 9.0], 2));
        assert!((p.matrix[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((p.matrix[(1, 1)] - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(p.rank, 2);
    }

    #[test]
    fn rank_one_pinv_lives_on_span() {
        // F = 4 ν νᵀ with ν = (1,1)/√2
        let f = fm(&[2.0, 2.0, 2.0, 2.0], 2);
        assert_eq!(f.rank(), 1);
        let p = pseudo_inverse(&f).matrix;
        // F⁺ = ν νᵀ / 4
        for i in 0..2 {
            for j in 0..2 {
                assert!((p[(i, j)] - 0.125).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_matrix_is_flagged() {
        let p = pseudo_inverse(&fm(&[0.0; 4], 2));
        assert!(p.zero_input);
        assert_eq!(p.rank, 0);
        assert!(p.matrix.iter().all(|&x| x == 0.0));
        assert_eq!(best_combination(&fm(&[0.0; 4], 2)).unwrap_err(), Error::ZeroMatrix);
    }

    #[test]
    fn best_combination_cases() {
        let (v, val) = best_combination(&fm(&[1.0, 0.0, 0.0, 9.0], 2)).unwrap();
        assert!((val - 9.0).abs() < 1e-14);
        assert!((v[1] - 1.0).abs() < 1e-14 && v[0].abs() < 1e-14);
        let (v, val) = best_combination(&fm(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 3)).unwrap();
        assert!((val - 1.0).abs() < 1e-14);
        assert!((v[0] - 1.0).abs() < 1e-14);
        // Negative-leading eigenvector gets flipped.
        let (v, _) = best_combination(&fm(&[1.0, -1.0, -1.0, 1.0], 2)).unwrap();
        assert!(v[0] > 0.0 && v[1] < 0.0);
    }
}
