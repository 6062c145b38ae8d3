//! Classical and quantum Fisher information and the bounds derived from them.

mod fisher;
mod quantum;
mod saturation;
mod scalar;

pub use fisher::{
    best_combination, classical_fim, classical_fim_with_floor, fim_from_jacobian, pseudo_inverse, FisherMatrix,
    FisherSource, PseudoInverse,
};
pub use quantum::{
    incompatibility, qfim, qfim_from_derivatives, qfim_pure, qfim_pure_fock, sld, sld_residual, PureQfim, QfimResult,
};
pub use saturation::{saturation_checks, SaturationReport, SaturationSummary};
pub use scalar::{
    kernel_weight, scalar_bound, weak_qcrb, weight_matrix_analysis, ScalarBound, WeakBound, WeightAnalysis,
};
