//! Named qubit models and measurements used by examples, tests and the CLI.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{DerivativeStrategy, ParametricModel};
use crate::operator::{DensityMatrix, HermitianOperator, Povm};
use crate::pauli;
use crate::scalar::{cr, CMatrix, Real};

fn half<T: Real>(m: CMatrix<T>) -> HermitianOperator<T> {
    HermitianOperator::symmetrized(m * cr(T::lit(0.5)))
}

/// `|+⟩` rotated about z: `e^{−iθσ_z/2}`.
pub fn qubit_phase<T: Real>() -> ParametricModel<T> {
    let rho = DensityMatrix::from_pure(&pauli::ket_plus()).expect("|+⟩ is normalized");
    ParametricModel::unitary(rho, vec![half(pauli::z())]).expect("valid unitary family")
}

/// `|0⟩` with the non-commuting generators `σ_x/2`, `σ_y/2`.
pub fn qubit_xy<T: Real>() -> ParametricModel<T> {
    let rho = DensityMatrix::from_pure(&pauli::ket0()).expect("|0⟩ is normalized");
    ParametricModel::unitary(rho, vec![half(pauli::x()), half(pauli::y())]).expect("valid unitary family")
}

/// Two independent qubit phase sensors, `|+⟩|+⟩` with `σ_z/2 ⊗ I` and `I ⊗ σ_z/2`.
pub fn two_sensor<T: Real>() -> ParametricModel<T> {
    let plus = DensityMatrix::from_pure(&pauli::ket_plus()).expect("|+⟩ is normalized");
    let rho = plus.tensor(&plus).expect("4 ≤ cap");
    let h = half::<T>(pauli::z());
    let id = HermitianOperator::identity(2);
    let gens = vec![h.tensor(&id).expect("4 ≤ cap"), id.tensor(&h).expect("4 ≤ cap")];
    ParametricModel::unitary(rho, gens).expect("valid unitary family")
}

/// `ρ_p = diag(p, 1 − p)` on `(0, 1)`.
pub fn coin<T: Real>() -> ParametricModel<T> {
    let d = HermitianOperator::diagonal(&[T::one(), -T::one()]);
    ParametricModel::custom(2, 1, |t: &[T]| DensityMatrix::diagonal(&[t[0], T::one() - t[0]]))
        .with_strategy(DerivativeStrategy::Explicit(Arc::new(move |_| Ok(vec![d.clone()]))))
        .and_then(|m| m.with_domain(vec![(T::zero(), T::one())]))
        .expect("valid coin model")
}

pub fn sigma_x_povm<T: Real>() -> Povm<T> {
    Povm::eigenbasis_of(&pauli::x()).expect("σ_x is Hermitian")
}

pub fn sigma_z_povm<T: Real>() -> Povm<T> {
    Povm::computational(2).expect("computational basis")
}

/// Equal-weight mixture of the three Pauli eigenbases (six outcomes).
pub fn pauli6_povm<T: Real>() -> Povm<T> {
    let third = T::lit(1.0 / 3.0);
    let parts = [pauli::x::<T>(), pauli::y(), pauli::z()]
        .iter()
        .map(|p| Povm::eigenbasis_of(p).map(|e| (third, e)))
        .collect::<Result<Vec<_>>>()
        .expect("Pauli eigenbases");
    Povm::randomized(&parts).expect("valid mixture")
}

pub fn named_model<T: Real>(name: &str) -> Result<ParametricModel<T>> {
    Ok(match name {
        "qubit_phase" => qubit_phase(),
        "qubit_xy" => qubit_xy(),
        "two_sensor" => two_sensor(),
        "coin" => coin(),
        other => return Err(Error::InvalidInput(format!("unknown model '{other}'"))),
    })
}

pub fn named_povm<T: Real>(name: &str, dim: usize) -> Result<Povm<T>> {
    let qubit = |p: Povm<T>| -> Result<Povm<T>> {
        match dim {
            2 => Ok(p),
            4 => p.tensor(&p),
            _ => Err(Error::InvalidInput(format!(
                "POVM '{name}' is defined for 1 or 2 qubits"
            ))),
        }
    };
    match name {
        "sigma_x" => qubit(sigma_x_povm()),
        "sigma_z" => qubit(sigma_z_povm()),
        "pauli6" => qubit(pauli6_povm()),
        "computational" => Povm::computational(dim),
        "trivial" => Ok(Povm::trivial(dim)),
        other => Err(Error::InvalidInput(format!("unknown POVM '{other}'"))),
    }
}
