//! Holevo Cramér–Rao bound.
//!
//! The optimisation runs over a reduced problem: with `W = BᵀB` (`B` is
//! `q × d`, `q = rank W`) and the columns `m_i = vec((X_i − θ_i)√ρ)`, one has
//! `Tr[W V] = Tr[B V Bᵀ]` and `Z = M†M`, so it suffices to minimise `Tr Ṽ`
//! subject to `Ṽ ⪰ (MBᵀ)†(MBᵀ)`. The free part of `MBᵀ` is expressed in a
//! real-orthonormal basis of the span of the `vec(B_r √ρ)`.

mod barrier;
mod family;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::Serialize;

pub use barrier::BarrierOptions;
pub use family::{hermitian_basis, unbiased_family, FamilyResiduals, UnbiasedFamily};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_pd_inverse, spectral_decomposition, symmetric_eigen};
use crate::model::ParametricModel;
use crate::{Hermitian, Weight};

type C = Complex<f64>;

#[derive(Debug, Clone, Serialize)]
pub struct HolevoDiagnostics {
    pub newton_steps: usize,
    pub outer_iterations: usize,
    /// Central-path duality gap `q/t` at termination.
    pub gap: f64,
    /// `λ_min(V_opt − Z[X_opt])`.
    pub feasibility: f64,
    pub family: FamilyResiduals,
    pub family_dimension: usize,
    /// Free directions left after projecting onto the support of ρ.
    pub active_dimension: usize,
}

#[derive(Debug, Clone)]
pub struct HolevoSolution {
    pub value: f64,
    pub x_opt: Vec<Hermitian>,
    pub v_opt: DMatrix<f64>,
    pub diagnostics: HolevoDiagnostics,
}

/// `Tr[W Re Z] + ‖√W Im Z √W‖₁`, the minimum of `Tr[W V]` over `V ⪰ Z`.
pub fn holevo_function(z: &DMatrix<C>, w: &Weight) -> Result<f64> {
    let root = crate::linalg::psd_sqrt_real(w.matrix())?;
    let re = z.map(|x| x.re);
    let im = z.map(|x| x.im);
    let a = &root * im * &root;
    Ok((w.matrix() * re).trace() + antisymmetric_trace_norm(&a)?)
}

/// `‖iA‖₁` for real antisymmetric `A`: the sum of singular values.
fn antisymmetric_trace_norm(a: &DMatrix<f64>) -> Result<f64> {
    let (vals, _) = symmetric_eigen(&(a.transpose() * a))?;
    Ok(vals.iter().map(|v| v.max(0.0).sqrt()).sum())
}

/// `|iA| = (AᵀA)^{1/2}`.
fn antisymmetric_abs(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    crate::linalg::psd_sqrt_real(&(a.transpose() * a))
}

pub fn holevo_bound(model: &ParametricModel<f64>, theta: &[f64], w: &Weight) -> Result<HolevoSolution> {
    holevo_bound_with(model, theta, w, &BarrierOptions::default())
}

pub fn holevo_bound_with(
    model: &ParametricModel<f64>,
    theta: &[f64],
    w: &Weight,
    opts: &BarrierOptions,
) -> Result<HolevoSolution> {
    let fam = unbiased_family(model, theta)?;
    solve_family(&fam, w, opts)
}

pub fn solve_family(fam: &UnbiasedFamily, w: &Weight, opts: &BarrierOptions) -> Result<HolevoSolution> {
    let d = fam.params();
    if w.dim() != d {
        return Err(Error::DimensionMismatch {
            what: "weight matrix",
            expected: d,
            found: w.dim(),
        });
    }
    let (wvals, wvecs) = symmetric_eigen(w.matrix())?;
    let wmax = wvals[d - 1].max(0.0);
    if wmax == 0.0 {
        return Err(Error::InvalidWeight("weight matrix is zero".into()));
    }
    let range: Vec<usize> = (0..d).filter(|&k| wvals[k] > 1e-12 * wmax).collect();
    let kernel: Vec<usize> = (0..d).filter(|&k| wvals[k] <= 1e-12 * wmax).collect();
    let q = range.len();
    // B = diag(√λ) U_rᵀ
    let b = DMatrix::from_fn(q, d, |l, i| wvals[range[l]].sqrt() * wvecs[(i, range[l])]);
    let b_pinv = DMatrix::from_fn(d, q, |i, l| wvecs[(i, range[l])] / wvals[range[l]].sqrt());

    // √ρ restricted to the support, n × r.
    let rho = fam.state();
    let n = rho.dim();
    let spec = rho.spectrum()?;
    let cut = crate::tolerance::RANK * spec.max_abs_value();
    let support: Vec<usize> = (0..n).filter(|&k| spec.values[k] > cut).collect();
    let root = DMatrix::from_fn(n, support.len(), |a, s| {
        spec.vectors[(a, support[s])] * C::new(spec.values[support[s]].sqrt(), 0.0)
    });
    let id = DMatrix::<C>::identity(n, n);
    let vec_of = |x: &DMatrix<C>| -> DVector<C> {
        let p = x * &root;
        DVector::from_column_slice(p.as_slice())
    };
    let m0: Vec<DVector<C>> = fam
        .particular
        .iter()
        .zip(&fam.theta)
        .map(|(x, t)| vec_of(&(x.matrix() - &id * C::new(*t, 0.0))))
        .collect();
    let bvecs: Vec<DVector<C>> = fam.homogeneous.iter().map(|h| vec_of(h.matrix())).collect();

    // Real-orthonormal basis of span_R{b_r}.
    let big_n = n * support.len();
    let kdim = bvecs.len();
    let (dirs, back) = if kdim == 0 {
        (Vec::new(), DMatrix::zeros(0, 0))
    } else {
        // Eigen-decomposition of the real Gram matrix Re⟨b_r, b_r'⟩; the
        // directions are then exact combinations of the b_r.
        let gram = DMatrix::from_fn(kdim, kdim, |r, r2| bvecs[r].dotc(&bvecs[r2]).re);
        let (vals, vecs) = symmetric_eigen(&gram)?;
        // ‖b_r‖² = Tr[ρ B_r²] ≤ 1 for an orthonormal basis, so the cut is absolute.
        let keep: Vec<usize> = (0..kdim).filter(|&k| vals[k] > 1e-13).collect();
        let back = DMatrix::from_fn(kdim, keep.len(), |r, s| vecs[(r, keep[s])] / vals[keep[s]].sqrt());
        let dirs: Vec<DVector<C>> = (0..keep.len())
            .map(|s| {
                let mut v = DVector::<C>::zeros(big_n);
                for r in 0..kdim {
                    v.axpy(C::new(back[(r, s)], 0.0), &bvecs[r], C::new(1.0, 0.0));
                }
                v
            })
            .collect();
        (dirs, back)
    };
    let mtilde0: Vec<DVector<C>> = (0..q)
        .map(|l| {
            let mut v = DVector::zeros(big_n);
            for i in 0..d {
                v.axpy(C::new(b[(l, i)], 0.0), &m0[i], C::new(1.0, 0.0));
            }
            v
        })
        .collect();
    let problem = barrier::Problem { m0: mtilde0, dirs };
    let active = problem.dirs.len();
    let result = if active == 0 {
        barrier::BarrierResult {
            c: DMatrix::zeros(q, 0),
            newton_steps: 0,
            outer_iterations: 0,
            gap: 0.0,
        }
    } else {
        problem.solve(opts)?
    };

    // Recover X_opt.
    let coeffs = if kdim == 0 {
        DMatrix::zeros(d, 0)
    } else {
        &b_pinv * (&result.c * back.transpose())
    };
    let x_opt = fam.operators(&coeffs);
    let z = fam.z_matrix(&x_opt);

    // Optimal V for this X: Ṽ = Re Z̃ + |i Im Z̃| on the range of W.
    let zt = b.map(|x| C::new(x, 0.0)) * &z * b.transpose().map(|x| C::new(x, 0.0));
    let zt = (&zt + zt.adjoint()) * C::new(0.5, 0.0);
    let mut vt = zt.map(|x| x.re) + antisymmetric_abs(&zt.map(|x| x.im))?;
    // W' coordinates: Z' = Uᵀ Z U.
    let uc = wvecs.map(|x| C::new(x, 0.0));
    let zp = uc.transpose() * &z * &uc;
    let mut vp = zp.map(|x| x.re);
    if !kernel.is_empty() {
        let margin = 1e-9 * vt.trace().abs() / q as f64 + f64::MIN_POSITIVE.sqrt();
        for l in 0..q {
            vt[(l, l)] += margin;
        }
    }
    for (l, &rl) in range.iter().enumerate() {
        for (l2, &rl2) in range.iter().enumerate() {
            vp[(rl, rl2)] = vt[(l, l2)] / (wvals[rl] * wvals[rl2]).sqrt();
        }
    }
    if !kernel.is_empty() {
        // V'_kk = Re Z'_kk + c I with c covering the Schur complement.
        let s_rr = DMatrix::from_fn(q, q, |a, bb| {
            C::new(vp[(range[a], range[bb])], 0.0) - zp[(range[a], range[bb])]
        });
        let s_rr = (&s_rr + s_rr.adjoint()) * C::new(0.5, 0.0);
        let kk = kernel.len();
        let s_rk = DMatrix::from_fn(q, kk, |a, k| C::new(0.0, -zp[(range[a], kernel[k])].im));
        let im_kk = DMatrix::from_fn(kk, kk, |a, k| C::new(0.0, zp[(kernel[a], kernel[k])].im));
        let inv = hermitian_pd_inverse(&s_rr)
            .map(|(_, inv)| inv)
            .ok_or(Error::SolverNonConvergence {
                iterations: result.newton_steps,
                gap: result.gap,
            })?;
        let t = im_kk + s_rk.adjoint() * inv * &s_rk;
        let t = (&t + t.adjoint()) * C::new(0.5, 0.0);
        let top = spectral_decomposition(&t)?.values.iter().fold(0.0f64, |m, v| m.max(*v));
        let c = top * (1.0 + 1e-9) + 1e-12 * vt.trace().abs();
        for &k in &kernel {
            vp[(k, k)] += c;
        }
    }
    let v_opt = &wvecs * vp * wvecs.transpose();
    let v_opt = (&v_opt + v_opt.transpose()) * 0.5;
    let slack = v_opt.map(|x| C::new(x, 0.0)) - &z;
    let slack = (&slack + slack.adjoint()) * C::new(0.5, 0.0);
    let feasibility = spectral_decomposition(&slack)?.values[0];
    let value = (w.matrix() * &v_opt).trace();
    Ok(HolevoSolution {
        value,
        x_opt,
        v_opt,
        diagnostics: HolevoDiagnostics {
            newton_steps: result.newton_steps,
            outer_iterations: result.outer_iterations,
            gap: result.gap,
            feasibility,
            family: fam.residuals,
            family_dimension: kdim,
            active_dimension: active,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Sandwich {
    /// `Tr[W F_Q⁻¹]`.
    pub qcrb: f64,
    pub hb: f64,
    pub r_measure: f64,
    /// `(1 + R)·QCRB`.
    pub upper: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// `QCRB ≤ HB ≤ (1 + R) QCRB ≤ 2 QCRB`, checked at tolerance `1e-5·QCRB`.
pub fn hb_sandwich(model: &ParametricModel<f64>, theta: &[f64], w: &Weight) -> Result<Sandwich> {
    let fam = unbiased_family(model, theta)?;
    let sol = solve_family(&fam, w, &BarrierOptions::default())?;
    let q = fam.qfim();
    let qcrb = (w.matrix() * q.qfim.pinv()).trace();
    let r = q.r_measure;
    let upper = (1.0 + r) * qcrb;
    let tol = 1e-5 * qcrb;
    let holds = qcrb - tol <= sol.value && sol.value <= upper + tol && upper <= 2.0 * qcrb + tol;
    Ok(Sandwich {
        qcrb,
        hb: sol.value,
        r_measure: r,
        upper,
        ratio: sol.value / qcrb,
        holds,
    })
}

/// The scalar bounds `Tr[W F⁻¹]/m ≥ HB/m ≥ Tr[W F_Q⁻¹]/m` for one POVM.
///
/// The most informative bound lies somewhere in `[max(HB, QCRB), CRB]`; it is
/// not computed, only bracketed.
#[derive(Debug, Clone, Serialize)]
pub struct BoundChain {
    pub label: String,
    pub m: usize,
    /// `Tr[W F⁺]/m` for the supplied POVM.
    pub crb: f64,
    /// `W` reaches directions the classical FIM cannot see: the CRB is infinite.
    pub crb_inestimable: bool,
    pub hb: f64,
    pub qcrb: f64,
    /// `W` reaches directions the QFIM cannot see.
    pub qcrb_inestimable: bool,
    /// `[max(HB, QCRB), CRB]`; `None` for an unbounded upper end.
    pub interval: (f64, Option<f64>),
    pub ordering_holds: bool,
    pub diagnostics: HolevoDiagnostics,
}

/// Relative slack granted to the ordering checks; matches the solver gap.
const CHAIN_SLACK: f64 = 1e-6;

pub fn bound_chain_report(
    model: &ParametricModel<f64>,
    povm: &crate::Povm64,
    theta: &[f64],
    w: &Weight,
    m: usize,
    label: &str,
) -> Result<BoundChain> {
    let f = crate::bounds::classical_fim(model, povm, theta)?;
    let crb = crate::bounds::scalar_bound(&f, w, m, false)?;
    let fam = unbiased_family(model, theta)?;
    let fq = &fam.qfim().qfim;
    let qcrb = crate::bounds::scalar_bound(fq, w, m, false)?;
    let sol = solve_family(&fam, w, &BarrierOptions::default())?;
    let hb = sol.value / m as f64;
    let lower = hb.max(qcrb.value);
    let upper = (!crb.inestimable).then_some(crb.value);
    let slack = CHAIN_SLACK * lower.abs().max(f64::MIN_POSITIVE);
    let ordering_holds = hb + slack >= qcrb.value && upper.is_none_or(|c| c + slack >= hb);
    Ok(BoundChain {
        label: label.to_string(),
        m,
        crb: crb.value,
        crb_inestimable: crb.inestimable,
        hb,
        qcrb: qcrb.value,
        qcrb_inestimable: qcrb.inestimable,
        interval: (lower, upper),
        ordering_holds,
        diagnostics: sol.diagnostics,
    })
}

#[cfg(test)]
mod tests;
