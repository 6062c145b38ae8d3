//! Multiparameter quantum estimation: Fisher information, Cramér–Rao and
//! Holevo bounds, incompatibility measures, distributed-sensing probes and
//! Monte-Carlo/Bayesian estimation harnesses.
//!
//! The operator layer is generic over [`Real`]; the `f64` aliases below are
//! what the rest of the crate and the CLI use.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod bounds;
pub mod catalog;
pub mod dqs;
pub mod error;
pub mod estimation;
pub mod fock;
pub mod holevo;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod pauli;
pub mod random;
pub mod scalar;
pub mod tolerance;

pub use error::{Error, Result};
pub use fock::{
    apply_phase_encoding, density_from_pure, DiagonalGenerator, FockBasis, Occupation, Sector, SectorState,
    SparseMultimodeState,
};
pub use linalg::{spectral_decomposition, Spectrum};
pub use operator::{DensityMatrix, HermitianOperator, Povm, WeightMatrix};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Hermitian = HermitianOperator<f64>;
pub type Density = DensityMatrix<f64>;
pub type Povm64 = Povm<f64>;
pub type Weight = WeightMatrix<f64>;
pub type FockState = SparseMultimodeState<f64>;
