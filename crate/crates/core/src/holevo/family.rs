//! Locally unbiased observables: `Tr[ρ X_i] = θ_i`, `Tr[∂_jρ X_i] = δ_ij`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::bounds::{qfim_from_derivatives, QfimResult};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, trace_product};
use crate::model::ParametricModel;
use crate::{Density, Hermitian};

type C = Complex<f64>;

/// Orthonormal basis of the real space of `n×n` Hermitian matrices under `Tr[AB]`.
pub fn hermitian_basis(n: usize) -> Vec<DMatrix<C>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for k in 0..n {
        let mut e = DMatrix::zeros(n, n);
        e[(k, k)] = C::new(1.0, 0.0);
        out.push(e);
    }
    for k in 0..n {
        for l in k + 1..n {
            let mut e = DMatrix::zeros(n, n);
            e[(k, l)] = C::new(s, 0.0);
            e[(l, k)] = C::new(s, 0.0);
            out.push(e);
            let mut e = DMatrix::zeros(n, n);
            e[(k, l)] = C::new(0.0, s);
            e[(l, k)] = C::new(0.0, -s);
            out.push(e);
        }
    }
    out
}

fn coordinates(basis: &[DMatrix<C>], a: &DMatrix<C>) -> DVector<f64> {
    DVector::from_iterator(basis.len(), basis.iter().map(|e| trace_product(e, a).re))
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct FamilyResiduals {
    /// `max_i |Tr[ρ X⁰_i] − θ_i|`.
    pub mean: f64,
    /// `max_ij |Tr[∂_jρ X⁰_i] − δ_ij|`.
    pub derivative: f64,
    /// `max_r max(|Tr[ρ B_r]|, |Tr[∂_jρ B_r]|)`.
    pub homogeneous: f64,
}

/// Affine family `X_i = X⁰_i + Σ_r c_ir B_r` of locally unbiased observables.
#[derive(Debug, Clone)]
pub struct UnbiasedFamily {
    pub theta: Vec<f64>,
    /// `X⁰_i = θ_i I + Σ_k (F_Q⁻¹)_ik L_k`.
    pub particular: Vec<Hermitian>,
    /// Orthonormal basis of the constraint null space.
    pub homogeneous: Vec<Hermitian>,
    pub residuals: FamilyResiduals,
    pub(crate) rho: Density,
    pub(crate) qfim: QfimResult<f64>,
}

pub fn unbiased_family(model: &ParametricModel<f64>, theta: &[f64]) -> Result<UnbiasedFamily> {
    let rho = model.evaluate(theta)?;
    let ds = model.state_derivatives(theta)?;
    let d = ds.len();
    let q = qfim_from_derivatives(&rho, &ds)?;
    if q.qfim.rank() < d {
        return Err(Error::NotIdentifiable {
            rank: q.qfim.rank(),
            needed: d,
        });
    }
    let n = rho.dim();
    let finv = q.qfim.pinv();
    let id = DMatrix::<C>::identity(n, n);
    let particular: Vec<Hermitian> = (0..d)
        .map(|i| {
            let mut x = &id * C::new(theta[i], 0.0);
            for k in 0..d {
                x += q.slds[k].matrix() * C::new(finv[(i, k)], 0.0);
            }
            Hermitian::symmetrized(x)
        })
        .collect();

    let basis = hermitian_basis(n);
    let dim = basis.len();
    let mut a = DMatrix::<f64>::zeros(d + 1, dim);
    a.row_mut(0).copy_from(&coordinates(&basis, rho.matrix()).transpose());
    for (j, dr) in ds.iter().enumerate() {
        a.row_mut(j + 1)
            .copy_from(&coordinates(&basis, dr.matrix()).transpose());
    }
    // Null space as the unit eigenspace of I − P_row, P_row the projector on A's row space.
    let svd = a.transpose().svd(true, false);
    let u = svd.u.expect("requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-10 * smax)
        .collect();
    let rank = kept.len();
    if rank < d + 1 {
        return Err(Error::NotIdentifiable { rank, needed: d + 1 });
    }
    let mut proj = DMatrix::<f64>::identity(dim, dim);
    for &k in &kept {
        let col = u.column(k);
        proj -= col * col.transpose();
    }
    let (vals, vecs) = symmetric_eigen(&proj)?;
    let null: Vec<usize> = (0..dim).filter(|&k| vals[k] > 0.5).collect();
    let homogeneous: Vec<Hermitian> = null
        .iter()
        .map(|&k| {
            let v = vecs.column(k);
            let mut x = DMatrix::<C>::zeros(n, n);
            for (e, &w) in basis.iter().zip(v.iter()) {
                x += e * C::new(w, 0.0);
            }
            Hermitian::symmetrized(x)
        })
        .collect();

    let mut res = FamilyResiduals::default();
    for (i, x) in particular.iter().enumerate() {
        res.mean = res
            .mean
            .max((trace_product(rho.matrix(), x.matrix()).re - theta[i]).abs());
        for (j, dr) in ds.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            res.derivative = res
                .derivative
                .max((trace_product(dr.matrix(), x.matrix()).re - target).abs());
        }
    }
    for b in &homogeneous {
        res.homogeneous = res.homogeneous.max(trace_product(rho.matrix(), b.matrix()).re.abs());
        for dr in &ds {
            res.homogeneous = res.homogeneous.max(trace_product(dr.matrix(), b.matrix()).re.abs());
        }
    }
    Ok(UnbiasedFamily {
        theta: theta.to_vec(),
        particular,
        homogeneous,
        residuals: res,
        rho,
        qfim: q,
    })
}

impl UnbiasedFamily {
    pub fn params(&self) -> usize {
        self.particular.len()
    }

    /// Number of free real directions.
    pub fn dimension(&self) -> usize {
        self.homogeneous.len()
    }

    pub fn qfim(&self) -> &QfimResult<f64> {
        &self.qfim
    }

    pub fn state(&self) -> &Density {
        &self.rho
    }

    /// `X_i = X⁰_i + Σ_r c_ir B_r` for a `d × K` coefficient matrix.
    pub fn operators(&self, c: &DMatrix<f64>) -> Vec<Hermitian> {
        self.particular
            .iter()
            .enumerate()
            .map(|(i, x0)| {
                let mut x = x0.matrix().clone();
                for (r, b) in self.homogeneous.iter().enumerate() {
                    x += b.matrix() * C::new(c[(i, r)], 0.0);
                }
                Hermitian::symmetrized(x)
            })
            .collect()
    }

    /// `Z_ij = Tr[ρ (X_i − θ_i)(X_j − θ_j)]`.
    pub fn z_matrix(&self, xs: &[Hermitian]) -> DMatrix<C> {
        let n = self.rho.dim();
        let id = DMatrix::<C>::identity(n, n);
        let shifted: Vec<DMatrix<C>> = xs
            .iter()
            .zip(&self.theta)
            .map(|(x, t)| x.matrix() - &id * C::new(*t, 0.0))
            .collect();
        let d = xs.len();
        DMatrix::from_fn(d, d, |i, j| {
            trace_product(&(self.rho.matrix() * &shifted[i]), &shifted[j])
        })
    }
}
