//! Validated operator types: Hermitian operators, density matrices, POVMs and
//! weight matrices.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{self, hermiticity_deviation, max_abs, spectral_decomposition, Spectrum};
use crate::scalar::{cr, CMatrix, CVector, RMatrix, Real};
use crate::tolerance::{self, scaled};

/// Dense Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator<T: Real> {
    entries: CMatrix<T>,
}

impl<T: Real> HermitianOperator<T> {
    /// Validates Hermiticity relative to the largest entry.
    pub fn new(entries: CMatrix<T>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                what: "Hermitian operator (square)",
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidInput("operator of dimension zero".into()));
        }
        let dev = hermiticity_deviation(&entries);
        if dev > scaled::<T>(tolerance::HERMITICITY) {
            return Err(Error::NotHermitian {
                deviation: dev.to_f64_lossy(),
            });
        }
        Ok(Self::symmetrized(entries))
    }

    /// Wraps `(m + m†)/2` without validation.
    pub fn symmetrized(m: CMatrix<T>) -> Self {
        let entries = (&m + m.adjoint()) * cr(T::lit(0.5));
        Self { entries }
    }

    pub fn from_real(m: &RMatrix<T>) -> Result<Self> {
        Self::new(linalg::to_complex(m))
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: CMatrix::identity(dim, dim),
        }
    }

    /// Real diagonal operator.
    pub fn diagonal(values: &[T]) -> Self {
        let n = values.len();
        Self {
            entries: CMatrix::from_fn(n, n, |i, j| if i == j { cr(values[i]) } else { cr(T::zero()) }),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.entries
    }

    pub fn spectrum(&self) -> Result<Spectrum<T>> {
        spectral_decomposition(&self.entries)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            entries: &self.entries * cr(s),
        }
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            entries: linalg::kron(&self.entries, &other.entries)?,
        })
    }

    pub fn trace(&self) -> T {
        self.entries.trace().re
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.entries)
    }
}

/// Trace-one positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    entries: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(entries: CMatrix<T>) -> Result<Self> {
        let h = HermitianOperator::new(entries).map_err(|e| Error::InvalidDensity(e.to_string()))?;
        let tr = h.trace();
        if (tr - T::one()).abs() > scaled::<T>(tolerance::TRACE) {
            return Err(Error::InvalidDensity(format!(
                "trace is {}, expected 1",
                tr.to_f64_lossy()
            )));
        }
        let spec = h.spectrum()?;
        let min = spec.values[0];
        if min < -scaled::<T>(tolerance::PSD) {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {}",
                min.to_f64_lossy()
            )));
        }
        Ok(Self {
            entries: h.into_matrix(),
        })
    }

    /// `|ψ⟩⟨ψ|` for a normalised `ψ`.
    pub fn from_pure(psi: &CVector<T>) -> Result<Self> {
        let norm2 = psi.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        if (norm2 - T::one()).abs() > scaled::<T>(tolerance::NORMALIZATION) * T::lit(100.0) {
            return Err(Error::InvalidState(format!("vector norm² is {}", norm2.to_f64_lossy())));
        }
        let entries = psi * psi.adjoint();
        Ok(Self::from_matrix_unchecked(entries))
    }

    /// `I/n`.
    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            entries: CMatrix::identity(n, n) * cr(T::one() / T::from_usize(n).unwrap()),
        }
    }

    /// Real diagonal density from probabilities.
    pub fn diagonal(p: &[T]) -> Result<Self> {
        Self::new(HermitianOperator::diagonal(p).into_matrix())
    }

    /// Skips validation; the matrix is symmetrised.
    pub(crate) fn from_matrix_unchecked(m: CMatrix<T>) -> Self {
        Self {
            entries: HermitianOperator::symmetrized(m).into_matrix(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn as_operator(&self) -> HermitianOperator<T> {
        HermitianOperator {
            entries: self.entries.clone(),
        }
    }

    pub fn spectrum(&self) -> Result<Spectrum<T>> {
        spectral_decomposition(&self.entries)
    }

    pub fn purity(&self) -> T {
        linalg::trace_product(&self.entries, &self.entries).re
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            entries: linalg::kron(&self.entries, &other.entries)?,
        })
    }

    /// Convex combination `Σ q_λ ρ_λ`.
    pub fn mixture(weights: &[T], states: &[Self]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::InvalidInput(
                "mixture weights and states differ in length".into(),
            ));
        }
        let n = states[0].dim();
        let mut acc = CMatrix::zeros(n, n);
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != n {
                return Err(Error::DimensionMismatch {
                    what: "mixture component",
                    expected: n,
                    found: s.dim(),
                });
            }
            acc += &s.entries * cr(*w);
        }
        Self::new(acc)
    }
}

/// Positive operator-valued measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm<T: Real> {
    elements: Vec<HermitianOperator<T>>,
}

impl<T: Real> Povm<T> {
    pub fn new(elements: Vec<HermitianOperator<T>>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let n = first.dim();
        let mut sum = CMatrix::<T>::zeros(n, n);
        for (k, e) in elements.iter().enumerate() {
            if e.dim() != n {
                return Err(Error::InvalidPovm(format!(
                    "element {k} has dimension {}, expected {n}",
                    e.dim()
                )));
            }
            let min = e.spectrum()?.values[0];
            if min < -scaled::<T>(tolerance::POVM_PSD) {
                return Err(Error::InvalidPovm(format!(
                    "element {k} has negative eigenvalue {}",
                    min.to_f64_lossy()
                )));
            }
            sum += e.matrix();
        }
        let dev = max_abs(&(sum - CMatrix::identity(n, n)));
        if dev > scaled::<T>(tolerance::POVM_COMPLETENESS) {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {}",
                dev.to_f64_lossy()
            )));
        }
        Ok(Self { elements })
    }

    /// Projective measurement onto the columns of a unitary.
    pub fn from_basis(basis: &CMatrix<T>) -> Result<Self> {
        let n = basis.nrows();
        let elements = (0..basis.ncols())
            .map(|k| {
                let v = basis.column(k).into_owned();
                HermitianOperator::symmetrized(&v * v.adjoint())
            })
            .collect::<Vec<_>>();
        if elements.len() != n {
            return Err(Error::InvalidPovm("basis is not square".into()));
        }
        Self::new(elements)
    }

    /// Eigenbasis measurement of a Hermitian observable.
    pub fn eigenbasis_of(observable: &CMatrix<T>) -> Result<Self> {
        let spec = spectral_decomposition(observable)?;
        Self::from_basis(&spec.vectors)
    }

    /// Computational-basis measurement.
    pub fn computational(n: usize) -> Result<Self> {
        Self::from_basis(&CMatrix::identity(n, n))
    }

    /// Trivial one-outcome POVM `{I}`.
    pub fn trivial(n: usize) -> Self {
        Self {
            elements: vec![HermitianOperator::identity(n)],
        }
    }

    /// Independent measurements on two subsystems, outcomes ordered `(a, b)` row-major.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut elements = Vec::with_capacity(self.len() * other.len());
        for a in &self.elements {
            for b in &other.elements {
                elements.push(a.tensor(b)?);
            }
        }
        Self::new(elements)
    }

    /// Mixture of POVMs on the same space: `Σ_i w_i E^{(i)}`, outcomes concatenated.
    pub fn randomized(parts: &[(T, Self)]) -> Result<Self> {
        let mut elements = Vec::new();
        for (w, p) in parts {
            elements.extend(p.elements.iter().map(|e| e.scale(*w)));
        }
        Self::new(elements)
    }

    pub fn elements(&self) -> &[HermitianOperator<T>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }
}

/// Real symmetric positive semidefinite weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix<T: Real> {
    entries: RMatrix<T>,
    positive_definite: bool,
}

impl<T: Real> WeightMatrix<T> {
    pub fn new(entries: RMatrix<T>) -> Result<Self> {
        let n = entries.nrows();
        if n != entries.ncols() || n == 0 {
            return Err(Error::InvalidWeight("weight must be square and non-empty".into()));
        }
        let scale = linalg::max_abs_real(&entries);
        let asym = linalg::max_abs_real(&(&entries - entries.transpose()));
        if scale > T::zero() && asym / scale > scaled::<T>(tolerance::HERMITICITY) {
            return Err(Error::InvalidWeight("weight is not symmetric".into()));
        }
        let sym = (&entries + entries.transpose()) * T::lit(0.5);
        let (vals, _) = linalg::symmetric_eigen(&sym)?;
        let lmax = vals[n - 1].abs().max(T::lit(f64::MIN_POSITIVE));
        if vals[0] < -scaled::<T>(tolerance::PSD) * lmax.max(T::one()) {
            return Err(Error::InvalidWeight(format!(
                "negative eigenvalue {}",
                vals[0].to_f64_lossy()
            )));
        }
        let positive_definite = vals[0] > scaled::<T>(tolerance::RANK) * lmax;
        Ok(Self {
            entries: sym,
            positive_definite,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            entries: RMatrix::identity(d, d),
            positive_definite: true,
        }
    }

    /// `ν νᵀ`.
    pub fn rank_one(nu: &[T]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(nu);
        Self::new(&v * v.transpose())
    }

    /// `Σ_j w_j ν_j ν_jᵀ`.
    pub fn from_directions(weights: &[T], directions: &[Vec<T>]) -> Result<Self> {
        if weights.len() != directions.len() || directions.is_empty() {
            return Err(Error::InvalidWeight("weights and directions differ in length".into()));
        }
        let d = directions[0].len();
        let mut m = RMatrix::zeros(d, d);
        for (w, nu) in weights.iter().zip(directions) {
            if nu.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "weight direction",
                    expected: d,
                    found: nu.len(),
                });
            }
            if *w < T::zero() {
                return Err(Error::InvalidWeight("negative direction weight".into()));
            }
            let v = nalgebra::DVector::from_column_slice(nu);
            m += (&v * v.transpose()) * *w;
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &RMatrix<T> {
        &self.entries
    }

    pub fn is_positive_definite(&self) -> bool {
        self.positive_definite
    }

    pub fn scale(&self, c: T) -> Result<Self> {
        Self::new(&self.entries * c)
    }
}

pub fn complex_identity<T: Real>(n: usize) -> CMatrix<T> {
    DMatrix::<Complex<T>>::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli;

    #[test]
    fn rejects_non_hermitian() {
        let mut m = pauli::x::<f64>();
        m[(0, 1)] = Complex::new(1.0, 0.5);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::<f64>::diagonal(&[0.5, 0.5]).is_ok());
        assert!(DensityMatrix::<f64>::diagonal(&[0.6, 0.5]).is_err());
        assert!(DensityMatrix::<f64>::diagonal(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn povm_completeness_is_checked() {
        let p0 = HermitianOperator::<f64>::diagonal(&[1.0, 0.0]);
        let p1 = HermitianOperator::<f64>::diagonal(&[0.0, 1.0 - 2e-9]);
        assert!(Povm::new(vec![p0.clone(), p1]).is_err());
        let p1 = HermitianOperator::<f64>::diagonal(&[0.0, 1.0 - 5e-10]);
        assert!(Povm::new(vec![p0, p1]).is_ok());
    }

    #[test]
    fn povm_rejects_negative_element() {
        let p0 = HermitianOperator::<f64>::diagonal(&[1.5, 0.0]);
        let p1 = HermitianOperator::<f64>::diagonal(&[-0.5, 1.0]);
        assert!(matches!(Povm::new(vec![p0, p1]), Err(Error::InvalidPovm(_))));
    }

    #[test]
    fn weight_flags_definiteness() {
        assert!(WeightMatrix::<f64>::identity(3).is_positive_definite());
        let w = WeightMatrix::<f64>::rank_one(&[1.0, 1.0]).unwrap();
        assert!(!w.is_positive_definite());
        assert!(WeightMatrix::new(RMatrix::<f64>::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
    }
}
