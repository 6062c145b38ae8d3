//! Pauli matrices and a few standard qubit objects.

use num_complex::Complex;

use crate::scalar::{CMatrix, CVector, Real};

fn m2<T: Real>(a: [[(f64, f64); 2]; 2]) -> CMatrix<T> {
    CMatrix::from_fn(2, 2, |i, j| Complex::new(T::lit(a[i][j].0), T::lit(a[i][j].1)))
}

pub fn x<T: Real>() -> CMatrix<T> {
    m2([[(0.0, 0.0), (1.0, 0.0)], [(1.0, 0.0), (0.0, 0.0)]])
}

pub fn y<T: Real>() -> CMatrix<T> {
    m2([[(0.0, 0.0), (0.0, -1.0)], [(0.0, 1.0), (0.0, 0.0)]])
}

pub fn z<T: Real>() -> CMatrix<T> {
    m2([[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (-1.0, 0.0)]])
}

/// `|0⟩`
pub fn ket0<T: Real>() -> CVector<T> {
    CVector::from_vec(vec![
        Complex::new(T::one(), T::zero()),
        Complex::new(T::zero(), T::zero()),
    ])
}

/// `|+⟩ = (|0⟩ + |1⟩)/√2`
pub fn ket_plus<T: Real>() -> CVector<T> {
    let s = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    CVector::from_vec(vec![Complex::new(s, T::zero()), Complex::new(s, T::zero())])
}
