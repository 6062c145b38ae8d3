//! Symmetric logarithmic derivatives and the quantum Fisher information.

use num_complex::Complex;

use super::fisher::{FisherMatrix, FisherSource};
use crate::error::{Error, Result};
use crate::fock::{DiagonalGenerator, SparseMultimodeState};
use crate::linalg::{psd_sqrt_real, symmetric_eigen, trace_product, Spectrum};
use crate::model::ParametricModel;
use crate::operator::{DensityMatrix, HermitianOperator};
use crate::scalar::{cr, CMatrix, CVector, RMatrix, Real};
use crate::tolerance::{self, scaled};

/// Eigenvalue-sum threshold below which SLD matrix elements are set to zero.
pub(crate) fn rank_cut<T: Real>(spec: &Spectrum<T>) -> T {
    scaled::<T>(tolerance::RANK) * spec.max_abs_value()
}

pub(crate) fn sld_in_spectrum<T: Real>(spec: &Spectrum<T>, drho: &CMatrix<T>) -> HermitianOperator<T> {
    let n = spec.dim();
    let u = &spec.vectors;
    let d = u.adjoint() * drho * u;
    let cut = rank_cut(spec);
    let mut l = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let s = spec.values[a] + spec.values[b];
            if s > cut {
                l[(a, b)] = d[(a, b)] * cr(T::lit(2.0) / s);
            }
        }
    }
    HermitianOperator::symmetrized(u * l * u.adjoint())
}

/// Minimal-norm solution of `∂ρ = (ρL + Lρ)/2`, zero on the kernel of ρ.
pub fn sld<T: Real>(rho: &DensityMatrix<T>, drho: &HermitianOperator<T>) -> Result<HermitianOperator<T>> {
    if rho.dim() != drho.dim() {
        return Err(Error::DimensionMismatch {
            what: "state derivative",
            expected: rho.dim(),
            found: drho.dim(),
        });
    }
    Ok(sld_in_spectrum(&rho.spectrum()?, drho.matrix()))
}

/// `‖(ρL + Lρ)/2 − ∂ρ‖_max`.
pub fn sld_residual<T: Real>(rho: &DensityMatrix<T>, drho: &HermitianOperator<T>, l: &HermitianOperator<T>) -> T {
    let r = rho.matrix();
    let lhs = (r * l.matrix() + l.matrix() * r) * cr(T::lit(0.5));
    crate::linalg::max_abs(&(lhs - drho.matrix()))
}

#[derive(Debug, Clone)]
pub struct QfimResult<T: Real> {
    pub qfim: FisherMatrix<T>,
    pub slds: Vec<HermitianOperator<T>>,
    /// `Im Tr[ρ L_i L_j]`, antisymmetric.
    pub g_q: RMatrix<T>,
    /// Incompatibility measure, clipped to `[0, 1]`.
    pub r_measure: T,
    /// Same before clipping.
    pub r_unclipped: T,
}

/// QFIM and SLD-based incompatibility matrix for a state and its derivatives.
pub fn qfim_from_derivatives<T: Real>(
    rho: &DensityMatrix<T>,
    derivatives: &[HermitianOperator<T>],
) -> Result<QfimResult<T>> {
    let d = derivatives.len();
    if d == 0 {
        return Err(Error::InvalidInput("model has no parameters".into()));
    }
    let spec = rho.spectrum()?;
    let slds: Vec<_> = derivatives
        .iter()
        .map(|dr| sld_in_spectrum(&spec, dr.matrix()))
        .collect();
    let rl: Vec<CMatrix<T>> = slds.iter().map(|l| rho.matrix() * l.matrix()).collect();
    let mut f = RMatrix::zeros(d, d);
    let mut g = RMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let t = trace_product(&rl[i], slds[j].matrix());
            f[(i, j)] = t.re;
            f[(j, i)] = t.re;
            if i != j {
                g[(i, j)] = t.im;
                g[(j, i)] = -t.im;
            }
        }
    }
    let qfim = FisherMatrix::new(f, FisherSource::Quantum)?;
    let r_unclipped = incompatibility(&qfim, &g)?;
    Ok(QfimResult {
        qfim,
        slds,
        g_q: g,
        r_measure: r_unclipped.max(T::zero()).min(T::one()),
        r_unclipped,
    })
}

pub fn qfim<T: Real>(model: &ParametricModel<T>, theta: &[T]) -> Result<QfimResult<T>> {
    let rho = model.evaluate(theta)?;
    let ds = model.state_derivatives(theta)?;
    qfim_from_derivatives(&rho, &ds)
}

/// Largest eigenvalue modulus of `i F⁺ G`.
///
/// `F⁺G` is similar to the antisymmetric `(F⁺)^{1/2} G (F⁺)^{1/2}`, whose
/// purely imaginary eigenvalues come in ± pairs with modulus equal to its
/// singular values.
pub fn incompatibility<T: Real>(f: &FisherMatrix<T>, g: &RMatrix<T>) -> Result<T> {
    if f.is_zero() {
        return Ok(T::zero());
    }
    let p = psd_sqrt_real(&f.pinv())?;
    let a = &p * g * &p;
    let (vals, _) = symmetric_eigen(&(a.transpose() * &a))?;
    Ok(vals[vals.len() - 1].max(T::zero()).sqrt())
}

/// Pure-state QFIM of `U(θ)|ψ⟩` for the product-of-exponentials family.
#[derive(Debug, Clone)]
pub struct PureQfim<T: Real> {
    pub qfim: FisherMatrix<T>,
    /// `Im ⟨ψ|𝓗 𝓗ᵀ|ψ⟩`.
    pub imaginary: RMatrix<T>,
}

/// `F = 4 Cov_ψ(𝓗)` with the Heisenberg-picture generators evaluated at θ.
pub fn qfim_pure<T: Real>(psi: &CVector<T>, generators: &[HermitianOperator<T>], theta: &[T]) -> Result<PureQfim<T>> {
    if theta.len() != generators.len() {
        return Err(Error::GeneratorCount {
            expected: generators.len(),
            found: theta.len(),
        });
    }
    // At θ = 0 the Heisenberg generators are the bare ones; skip the
    // eigendecompositions the general family needs.
    let hs = if theta.iter().all(|t| *t == T::zero()) {
        DensityMatrix::from_pure(psi)?;
        if let Some(g) = generators.iter().find(|g| g.dim() != psi.len()) {
            return Err(Error::DimensionMismatch {
                what: "generator dimension",
                expected: psi.len(),
                found: g.dim(),
            });
        }
        generators.to_vec()
    } else {
        let rho = DensityMatrix::from_pure(psi)?;
        crate::model::UnitaryFamily::new(rho, generators.to_vec())?.heisenberg_generators(theta)
    };
    let norm = psi.norm();
    let psi = psi.map(|z| z / cr(norm));
    let hpsi: Vec<CVector<T>> = hs.iter().map(|h| h.matrix() * &psi).collect();
    let means: Vec<T> = hpsi.iter().map(|v| psi.dotc(v).re).collect();
    let d = hs.len();
    let mut f = RMatrix::zeros(d, d);
    let mut im = RMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            // ⟨ψ|𝓗_i 𝓗_j|ψ⟩ = ⟨𝓗_i ψ|𝓗_j ψ⟩
            let c: Complex<T> = hpsi[i].dotc(&hpsi[j]);
            f[(i, j)] = T::lit(4.0) * (c.re - means[i] * means[j]);
            im[(i, j)] = c.im;
        }
    }
    Ok(PureQfim {
        qfim: FisherMatrix::new(f, FisherSource::Quantum)?,
        imaginary: im,
    })
}

/// `F = 4 Cov(h)` under the occupation distribution `|c_n|²` of a Fock-basis state.
pub fn qfim_pure_fock<T: Real>(
    state: &SparseMultimodeState<T>,
    generators: &[DiagonalGenerator],
) -> Result<FisherMatrix<T>> {
    let d = generators.len();
    if d == 0 {
        return Err(Error::GeneratorCount { expected: 1, found: 0 });
    }
    let modes = state.basis().modes;
    if let Some(g) = generators.iter().find(|g| g.modes() != modes) {
        return Err(Error::DimensionMismatch {
            what: "generator modes",
            expected: modes,
            found: g.modes(),
        });
    }
    let norm = state.norm_sqr();
    let mut mean = vec![T::zero(); d];
    let mut second = RMatrix::<T>::zeros(d, d);
    for (occ, amp) in state.amplitudes() {
        let w = amp.norm_sqr() / norm;
        let h: Vec<T> = generators.iter().map(|g| g.eigenvalue::<T>(occ)).collect();
        for i in 0..d {
            mean[i] += w * h[i];
            for j in 0..d {
                second[(i, j)] += w * h[i] * h[j];
            }
        }
    }
    let mut f = RMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            f[(i, j)] = T::lit(4.0) * (second[(i, j)] - mean[i] * mean[j]);
        }
    }
    FisherMatrix::new(f, FisherSource::Quantum)
}
