//! Seeded random instances: Hermitian operators, states, POVMs and unitary
//! models. Used by the property suites and the CLI's random-model scenarios.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::spectral_decomposition;
use crate::model::ParametricModel;
use crate::operator::{DensityMatrix, HermitianOperator, Povm};

pub type Matrix = DMatrix<Complex<f64>>;

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    })
}

pub fn hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianOperator<f64> {
    let g = gaussian(n, n, rng);
    HermitianOperator::symmetrized((&g + g.adjoint()) * Complex::new(0.5, 0.0))
}

/// Random density matrix of the given rank (Wishart construction).
pub fn density<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> DensityMatrix<f64> {
    let g = gaussian(n, rank.clamp(1, n), rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m / Complex::new(tr, 0.0)).expect("Wishart matrix is a valid state")
}

/// Random unitary from the eigenvectors of a random Hermitian matrix.
pub fn unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
    spectral_decomposition(hermitian(n, rng).matrix())
        .expect("random Hermitian matrices diagonalise")
        .vectors
}

/// Random POVM with `outcomes` elements, `E_k = S^{−1/2} A_k S^{−1/2}`.
pub fn povm<R: Rng + ?Sized>(n: usize, outcomes: usize, rng: &mut R) -> Povm<f64> {
    // The last element tops the ranks up to n so the sum is invertible.
    let mut total_rank = 0;
    let parts: Vec<Matrix> = (0..outcomes)
        .map(|k| {
            let mut r = 1 + rng.random_range(0..n);
            if k + 1 == outcomes {
                r = r.max(n.saturating_sub(total_rank)).min(n);
            }
            total_rank += r;
            let g = gaussian(n, r, rng);
            &g * g.adjoint()
        })
        .collect();
    let sum = parts.iter().fold(Matrix::zeros(n, n), |a, p| a + p);
    let inv_root = spectral_decomposition(&sum)
        .expect("sum of PSD matrices")
        .map(|l| 1.0 / l.sqrt());
    let elements = parts
        .iter()
        .map(|p| HermitianOperator::symmetrized(&inv_root * p * &inv_root))
        .collect();
    Povm::new(elements).expect("normalised random POVM")
}

/// Unitary family with random generators around a random state of the given rank.
pub fn unitary_model<R: Rng + ?Sized>(
    n: usize,
    params: usize,
    rank: usize,
    rng: &mut R,
) -> Result<ParametricModel<f64>> {
    let rho = density(n, rank, rng);
    let gens = (0..params).map(|_| hermitian(n, rng)).collect();
    ParametricModel::unitary(rho, gens)
}

pub fn real_psd<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    &g * g.transpose()
}

pub fn parameters<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_hermitian_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let h = hermitian(8, &mut rng);
            let s = h.spectrum().unwrap();
            assert!(s.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
            assert!(max_abs(&(s.reconstruct() - h.matrix())) < 1e-10);
        }
    }

    #[test]
    fn random_objects_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = povm(4, 5, &mut rng);
        assert_eq!(p.len(), 5);
        let rho = density(4, 2, &mut rng);
        let s = rho.spectrum().unwrap();
        assert!(s.values[1].abs() < 1e-12 && s.values[2] > 1e-6);
    }
}
