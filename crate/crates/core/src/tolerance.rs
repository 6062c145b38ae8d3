//! Numerical tolerances shared by every module.
//!
//! The values are the `f64` table. For lower-precision scalars each threshold
//! is widened to a fixed multiple of machine epsilon when that is larger.

use serde::Serialize;

use crate::scalar::Real;

/// Relative Hermiticity tolerance (relative to the max-abs entry).
pub const HERMITICITY: f64 = 1e-12;
/// Trace-one tolerance for density matrices.
pub const TRACE: f64 = 1e-10;
/// Lowest admissible eigenvalue of a density matrix.
pub const PSD: f64 = 1e-10;
/// Lowest admissible eigenvalue of a POVM element.
pub const POVM_PSD: f64 = 1e-9;
/// Per-entry completeness tolerance of a POVM.
pub const POVM_COMPLETENESS: f64 = 1e-9;
/// Normalisation tolerance of pure states.
pub const NORMALIZATION: f64 = 1e-12;
/// Rank cut-off, relative to the largest eigenvalue.
pub const RANK: f64 = 1e-10;
/// Probabilities below `-PROBABILITY_CLIP` are an error; above it they are clipped.
pub const PROBABILITY_CLIP: f64 = 1e-12;
/// Probability-vector normalisation tolerance.
pub const PROBABILITY_SUM: f64 = 1e-9;
/// Outcomes below this probability are dropped from Fisher sums.
pub const P_FLOOR: f64 = 1e-12;
/// Tolerance of the commutativity/saturation predicates.
pub const SATURATION: f64 = 1e-8;
/// Default dense Hilbert-space cap.
pub const DIMENSION_CAP: usize = 512;

/// Widens an `f64` tolerance for the scalar type `T`.
pub fn scaled<T: Real>(tol: f64) -> T {
    let floor = T::machine_eps() * T::lit(64.0);
    let t = T::lit(tol);
    if t > floor {
        t
    } else {
        floor
    }
}

/// Snapshot of the tolerance table, embedded in reports.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ToleranceTable {
    pub hermiticity: f64,
    pub trace: f64,
    pub psd: f64,
    pub povm_psd: f64,
    pub povm_completeness: f64,
    pub normalization: f64,
    pub rank: f64,
    pub probability_clip: f64,
    pub probability_sum: f64,
    pub p_floor: f64,
    pub saturation: f64,
    pub dimension_cap: usize,
}

impl Default for ToleranceTable {
    fn default() -> Self {
        Self {
            hermiticity: HERMITICITY,
            trace: TRACE,
            psd: PSD,
            povm_psd: POVM_PSD,
            povm_completeness: POVM_COMPLETENESS,
            normalization: NORMALIZATION,
            rank: RANK,
            probability_clip: PROBABILITY_CLIP,
            probability_sum: PROBABILITY_SUM,
            p_floor: P_FLOOR,
            saturation: SATURATION,
            dimension_cap: DIMENSION_CAP,
        }
    }
}
