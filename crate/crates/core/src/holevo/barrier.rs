//! Log-det barrier method for `min Tr Ṽ  s.t.  Ṽ ⪰ M̃(c)†M̃(c)`, `Ṽ` real symmetric,
//! `M̃` affine in the real coefficients `c`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::hermitian_pd_inverse;

type C = Complex<f64>;

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Stop once `q/t ≤ gap_tolerance · Tr Ṽ`.
    pub gap_tolerance: f64,
    pub max_newton_steps: usize,
    pub mu: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-10,
            max_newton_steps: 500,
            mu: 10.0,
        }
    }
}

/// `m̃_l(c) = m0_l + Σ_s c_ls q_s` with `Re⟨q_s, q_s'⟩ = δ_ss'`.
pub struct Problem {
    pub m0: Vec<DVector<C>>,
    pub dirs: Vec<DVector<C>>,
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    /// `q × s` coefficients.
    pub c: DMatrix<f64>,
    pub newton_steps: usize,
    pub outer_iterations: usize,
    /// `q/t` at termination.
    pub gap: f64,
}

struct State {
    c: DMatrix<f64>,
    v: DMatrix<f64>,
}

impl Problem {
    fn q(&self) -> usize {
        self.m0.len()
    }

    fn s(&self) -> usize {
        self.dirs.len()
    }

    fn columns(&self, c: &DMatrix<f64>) -> Vec<DVector<C>> {
        self.m0
            .iter()
            .enumerate()
            .map(|(l, m)| {
                let mut v = m.clone();
                for (s, q) in self.dirs.iter().enumerate() {
                    v.axpy(C::new(c[(l, s)], 0.0), q, C::new(1.0, 0.0));
                }
                v
            })
            .collect()
    }

    pub fn gram(&self, c: &DMatrix<f64>) -> DMatrix<C> {
        let m = self.columns(c);
        let q = self.q();
        DMatrix::from_fn(q, q, |a, b| m[a].dotc(&m[b]))
    }

    fn slack(&self, st: &State) -> DMatrix<C> {
        st.v.map(|x| C::new(x, 0.0)) - self.gram(&st.c)
    }

    /// `t Tr Ṽ − log det S`, or `None` outside the domain.
    fn objective(&self, st: &State, t: f64) -> Option<f64> {
        let (logdet, _) = hermitian_pd_inverse(&self.slack(st))?;
        Some(t * st.v.trace() - logdet)
    }

    fn nvars(&self) -> usize {
        let q = self.q();
        q * self.s() + q * (q + 1) / 2
    }

    fn v_index(q: usize) -> Vec<(usize, usize)> {
        let mut idx = Vec::new();
        for a in 0..q {
            for b in a..q {
                idx.push((a, b));
            }
        }
        idx
    }

    fn apply(&self, st: &State, dx: &DVector<f64>, alpha: f64) -> State {
        let (q, s) = (self.q(), self.s());
        let mut c = st.c.clone();
        for l in 0..q {
            for k in 0..s {
                c[(l, k)] += alpha * dx[l * s + k];
            }
        }
        let mut v = st.v.clone();
        for (p, (a, b)) in Self::v_index(q).into_iter().enumerate() {
            let delta = alpha * dx[q * s + p];
            v[(a, b)] += delta;
            if a != b {
                v[(b, a)] += delta;
            }
        }
        State { c, v }
    }

    /// Gradient and Hessian of the barrier objective.
    fn derivatives(&self, st: &State, t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let (q, s) = (self.q(), self.s());
        let (_, y) = hermitian_pd_inverse(&self.slack(st))?;
        let cols = self.columns(&st.c);
        let omega = DMatrix::from_fn(s, s, |a, b| self.dirs[a].dotc(&self.dirs[b]));

        let n = self.nvars();
        let mut grad = DVector::zeros(n);
        // Y·dS for every variable.
        let mut yds: Vec<DMatrix<C>> = Vec::with_capacity(n);
        for l in 0..q {
            for k in 0..s {
                let g = DVector::from_fn(q, |b, _| self.dirs[k].dotc(&cols[b]));
                let mut dz = DMatrix::<C>::zeros(q, q);
                for b in 0..q {
                    dz[(l, b)] += g[b];
                    dz[(b, l)] += g[b].conj();
                }
                let mut acc = C::new(0.0, 0.0);
                for b in 0..q {
                    acc += y[(b, l)] * g[b];
                }
                grad[l * s + k] = 2.0 * acc.re;
                yds.push(-(&y * dz));
            }
        }
        for (p, (a, b)) in Self::v_index(q).into_iter().enumerate() {
            let mut e = DMatrix::<C>::zeros(q, q);
            e[(a, b)] = C::new(1.0, 0.0);
            e[(b, a)] = C::new(1.0, 0.0);
            if a == b {
                grad[q * s + p] = t - y[(a, a)].re;
            } else {
                grad[q * s + p] = -2.0 * y[(a, b)].re;
            }
            yds.push(&y * e);
        }
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut h = 0.0;
                let (ai, aj) = (&yds[i], &yds[j]);
                for a in 0..q {
                    for b in 0..q {
                        h += (ai[(a, b)] * aj[(b, a)]).re;
                    }
                }
                hess[(i, j)] = h;
                hess[(j, i)] = h;
            }
        }
        for l in 0..q {
            for k in 0..s {
                for l2 in 0..q {
                    for k2 in 0..s {
                        let extra = y[(l2, l)] * omega[(k, k2)] + y[(l, l2)] * omega[(k2, k)];
                        hess[(l * s + k, l2 * s + k2)] += extra.re;
                    }
                }
            }
        }
        Some((grad, hess))
    }

    pub fn solve(&self, opts: &BarrierOptions) -> Result<BarrierResult> {
        let (q, s) = (self.q(), self.s());
        let c = DMatrix::zeros(q, s);
        let z0 = self.gram(&c);
        let z0 = (&z0 + z0.adjoint()) * C::new(0.5, 0.0);
        let lmax = z0.clone().symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(*v));
        let scale = lmax.max(f64::MIN_POSITIVE.sqrt());
        let mut st = State {
            c,
            v: DMatrix::identity(q, q) * (2.0 * lmax + scale),
        };
        let qf = q as f64;
        let mut t = qf / st.v.trace();
        let mut newton_steps = 0;
        let mut outer = 0;
        loop {
            outer += 1;
            // Centering.
            let mut inner = 0;
            loop {
                inner += 1;
                if inner > 60 {
                    break;
                }
                if newton_steps >= opts.max_newton_steps {
                    return Err(Error::SolverNonConvergence {
                        iterations: newton_steps,
                        gap: qf / t,
                    });
                }
                let (g, h) = self.derivatives(&st, t).ok_or(Error::SolverNonConvergence {
                    iterations: newton_steps,
                    gap: qf / t,
                })?;
                let dx = solve_spd(&h, &(-&g));
                let decrement = -g.dot(&dx);
                newton_steps += 1;
                if !decrement.is_finite() || decrement / 2.0 <= 1e-9 {
                    break;
                }
                let f0 = self.objective(&st, t).expect("current iterate is feasible");
                let mut alpha = 1.0;
                let mut moved = false;
                for _ in 0..60 {
                    let trial = self.apply(&st, &dx, alpha);
                    if let Some(f1) = self.objective(&trial, t) {
                        if f1 <= f0 - 0.25 * alpha * decrement {
                            moved = f0 - f1 > 1e-15 * f0.abs().max(1.0);
                            st = trial;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            let tr = st.v.trace();
            if qf / t <= opts.gap_tolerance * tr.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            t *= opts.mu;
        }
        Ok(BarrierResult {
            c: st.c,
            newton_steps,
            outer_iterations: outer,
            gap: qf / t,
        })
    }
}

fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = h.clone().cholesky() {
        return ch.solve(rhs);
    }
    let n = h.nrows();
    let jitter = 1e-14 * h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut reg = h.clone();
    for k in 0..n {
        reg[(k, k)] += jitter;
    }
    match reg.clone().cholesky() {
        Some(ch) => ch.solve(rhs),
        None => reg.lu().solve(rhs).unwrap_or_else(|| DVector::zeros(n)),
    }
}
