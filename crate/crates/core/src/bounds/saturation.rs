//! Commutativity diagnostics deciding whether the QCRB can be attained.

use serde::Serialize;

use super::quantum::{qfim_from_derivatives, rank_cut, QfimResult};
use crate::error::Result;
use crate::linalg::{commutator, max_abs, max_abs_real};
use crate::model::ParametricModel;
use crate::scalar::{CMatrix, RMatrix, Real};
use crate::tolerance::{self, scaled};

#[derive(Debug, Clone)]
pub struct SaturationReport<T: Real> {
    /// `‖G_Q‖_max`.
    pub g_q_max: T,
    /// `max_ij ‖Π [L_i, L_j] Π‖_max`, Π the support projector of ρ.
    pub partial_commutator_max: T,
    /// `max_ij ‖[L_i, L_j]‖_max`.
    pub full_commutator_max: T,
    /// `Im ⟨ψ|𝓗 𝓗ᵀ|ψ⟩` for pure unitary models.
    pub pure_imaginary: Option<RMatrix<T>>,
    /// `‖4·Im⟨𝓗𝓗ᵀ⟩ − G_Q‖_max`, validating the pure-state shortcut.
    pub pure_vs_sld_deviation: Option<T>,
    pub weak_commutativity: bool,
    pub partial_commutativity: bool,
    pub full_commutativity: bool,
    pub pure_condition: Option<bool>,
    pub qfim: QfimResult<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SaturationSummary {
    pub g_q_max: f64,
    pub partial_commutator_max: f64,
    pub full_commutator_max: f64,
    pub pure_imaginary: Option<Vec<Vec<f64>>>,
    pub pure_vs_sld_deviation: Option<f64>,
    pub weak_commutativity: bool,
    pub partial_commutativity: bool,
    pub full_commutativity: bool,
    pub pure_condition: Option<bool>,
}

impl<T: Real> SaturationReport<T> {
    pub fn summary(&self) -> SaturationSummary {
        SaturationSummary {
            g_q_max: self.g_q_max.to_f64_lossy(),
            partial_commutator_max: self.partial_commutator_max.to_f64_lossy(),
            full_commutator_max: self.full_commutator_max.to_f64_lossy(),
            pure_imaginary: self.pure_imaginary.as_ref().map(|m| {
                (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| m[(i, j)].to_f64_lossy()).collect())
                    .collect()
            }),
            pure_vs_sld_deviation: self.pure_vs_sld_deviation.map(|x| x.to_f64_lossy()),
            weak_commutativity: self.weak_commutativity,
            partial_commutativity: self.partial_commutativity,
            full_commutativity: self.full_commutativity,
            pure_condition: self.pure_condition,
        }
    }
}

pub fn saturation_checks<T: Real>(model: &ParametricModel<T>, theta: &[T]) -> Result<SaturationReport<T>> {
    let rho = model.evaluate(theta)?;
    let ds = model.state_derivatives(theta)?;
    let q = qfim_from_derivatives(&rho, &ds)?;
    let spec = rho.spectrum()?;
    let n = rho.dim();
    let cut = rank_cut(&spec);
    let mut pi = CMatrix::<T>::zeros(n, n);
    for k in 0..n {
        if spec.values[k] > cut {
            let v = spec.vectors.column(k);
            pi += v * v.adjoint();
        }
    }
    let d = q.slds.len();
    let mut partial = T::zero();
    let mut full = T::zero();
    for i in 0..d {
        for j in i + 1..d {
            let c = commutator(q.slds[i].matrix(), q.slds[j].matrix());
            full = full.max(max_abs(&c));
            partial = partial.max(max_abs(&(&pi * &c * &pi)));
        }
    }
    let g_q_max = max_abs_real(&q.g_q);
    let tol = scaled::<T>(tolerance::SATURATION);

    let mut pure_imaginary = None;
    let mut deviation = None;
    let mut pure_condition = None;
    if let Some(family) = model.unitary_family() {
        let init = family.initial();
        if (init.purity() - T::one()).abs() <= scaled::<T>(1e-10) {
            let s = init.spectrum()?;
            let psi = s.vectors.column(n - 1).into_owned();
            let hs = family.heisenberg_generators(theta);
            let hpsi: Vec<_> = hs.iter().map(|h| h.matrix() * &psi).collect();
            let mut im = RMatrix::zeros(d, d);
            for a in 0..d {
                for b in 0..d {
                    im[(a, b)] = hpsi[a].dotc(&hpsi[b]).im;
                }
            }
            deviation = Some(max_abs_real(&(&im * T::lit(4.0) - &q.g_q)));
            pure_condition = Some(max_abs_real(&im) <= tol);
            pure_imaginary = Some(im);
        }
    }
    Ok(SaturationReport {
        g_q_max,
        partial_commutator_max: partial,
        full_commutator_max: full,
        pure_imaginary,
        pure_vs_sld_deviation: deviation,
        weak_commutativity: g_q_max <= tol,
        partial_commutativity: partial <= tol,
        full_commutativity: full <= tol,
        pure_condition,
        qfim: q,
    })
}
