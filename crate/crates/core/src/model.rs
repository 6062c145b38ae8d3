//! Parametric state families `θ ↦ ρ_θ`, their derivatives and Born-rule
//! outcome probabilities.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{commutator, Spectrum};
use crate::operator::{DensityMatrix, HermitianOperator, Povm};
use crate::scalar::{CMatrix, Real};
use crate::tolerance::{self, scaled};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

pub type EvalFn<T> = Arc<dyn Fn(&[T]) -> Result<DensityMatrix<T>> + Send + Sync>;
pub type DerivFn<T> = Arc<dyn Fn(&[T]) -> Result<Vec<HermitianOperator<T>>> + Send + Sync>;

/// How `∂_j ρ_θ` is obtained.
#[derive(Clone)]
pub enum DerivativeStrategy<T: Real> {
    /// `−i[K_j(θ), ρ_θ]` from the generators of a unitary family.
    AnalyticUnitary,
    /// User-supplied derivative callback.
    Explicit(DerivFn<T>),
    /// Central differences with one Richardson refinement.
    FiniteDifference { step: T },
}

impl<T: Real> fmt::Debug for DerivativeStrategy<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AnalyticUnitary => write!(f, "AnalyticUnitary"),
            Self::Explicit(_) => write!(f, "Explicit"),
            Self::FiniteDifference { step } => write!(f, "FiniteDifference({})", step.to_f64_lossy()),
        }
    }
}

/// `ρ_θ = U(θ) ρ₀ U(θ)†` with `U(θ) = e^{−iθ_d H_d} ⋯ e^{−iθ_1 H_1}`.
#[derive(Debug, Clone)]
pub struct UnitaryFamily<T: Real> {
    initial: DensityMatrix<T>,
    generators: Vec<HermitianOperator<T>>,
    spectra: Vec<Spectrum<T>>,
}

impl<T: Real> UnitaryFamily<T> {
    pub fn new(initial: DensityMatrix<T>, generators: Vec<HermitianOperator<T>>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidInput(
                "a unitary family needs at least one generator".into(),
            ));
        }
        for g in &generators {
            if g.dim() != initial.dim() {
                return Err(Error::DimensionMismatch {
                    what: "generator dimension",
                    expected: initial.dim(),
                    found: g.dim(),
                });
            }
        }
        let spectra = generators.iter().map(|g| g.spectrum()).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            initial,
            generators,
            spectra,
        })
    }

    pub fn initial(&self) -> &DensityMatrix<T> {
        &self.initial
    }

    pub fn generators(&self) -> &[HermitianOperator<T>] {
        &self.generators
    }

    fn factor(&self, j: usize, theta: T) -> CMatrix<T> {
        self.spectra[j].map_complex(|l| {
            let ph = theta * l;
            Complex::new(ph.cos(), -ph.sin())
        })
    }

    /// `U(θ)`.
    pub fn unitary(&self, theta: &[T]) -> CMatrix<T> {
        let n = self.initial.dim();
        let mut u = CMatrix::identity(n, n);
        for (j, &t) in theta.iter().enumerate() {
            u = self.factor(j, t) * u;
        }
        u
    }

    /// Generators in the Schrödinger picture, `∂_j U = −i K_j U`.
    pub fn local_generators(&self, theta: &[T]) -> Vec<CMatrix<T>> {
        let n = self.initial.dim();
        let d = self.generators.len();
        // left[j] = A_d ⋯ A_{j+1}
        let mut left = vec![CMatrix::identity(n, n); d];
        for j in (0..d.saturating_sub(1)).rev() {
            left[j] = &left[j + 1] * self.factor(j + 1, theta[j + 1]);
        }
        (0..d)
            .map(|j| &left[j] * self.generators[j].matrix() * left[j].adjoint())
            .collect()
    }

    /// `𝓗_j = i U† ∂_j U = U† K_j U`.
    pub fn heisenberg_generators(&self, theta: &[T]) -> Vec<HermitianOperator<T>> {
        let u = self.unitary(theta);
        self.local_generators(theta)
            .into_iter()
            .map(|k| HermitianOperator::symmetrized(u.adjoint() * k * &u))
            .collect()
    }

    pub fn evaluate(&self, theta: &[T]) -> DensityMatrix<T> {
        let u = self.unitary(theta);
        DensityMatrix::from_matrix_unchecked(&u * self.initial.matrix() * u.adjoint())
    }

    pub fn derivatives(&self, theta: &[T]) -> Vec<HermitianOperator<T>> {
        let rho = self.evaluate(theta);
        let minus_i = Complex::new(T::zero(), -T::one());
        self.local_generators(theta)
            .into_iter()
            .map(|k| HermitianOperator::symmetrized(commutator(&k, rho.matrix()) * minus_i))
            .collect()
    }
}

#[derive(Clone)]
enum Family<T: Real> {
    Unitary(UnitaryFamily<T>),
    Custom(EvalFn<T>),
}

/// A parametric family of density matrices with a derivative strategy.
#[derive(Clone)]
pub struct ParametricModel<T: Real> {
    dim: usize,
    params: usize,
    family: Family<T>,
    strategy: DerivativeStrategy<T>,
    domain: Option<Vec<(T, T)>>,
}

impl<T: Real> fmt::Debug for ParametricModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricModel")
            .field("dim", &self.dim)
            .field("params", &self.params)
            .field("unitary", &matches!(self.family, Family::Unitary(_)))
            .field("strategy", &self.strategy)
            .finish()
    }
}

impl<T: Real> ParametricModel<T> {
    /// Unitary family with analytic derivatives.
    pub fn unitary(initial: DensityMatrix<T>, generators: Vec<HermitianOperator<T>>) -> Result<Self> {
        let fam = UnitaryFamily::new(initial, generators)?;
        Ok(Self {
            dim: fam.initial.dim(),
            params: fam.generators.len(),
            family: Family::Unitary(fam),
            strategy: DerivativeStrategy::AnalyticUnitary,
            domain: None,
        })
    }

    /// Arbitrary family; derivatives by finite differences unless replaced
    /// with [`ParametricModel::with_strategy`].
    pub fn custom(
        dim: usize,
        params: usize,
        eval: impl Fn(&[T]) -> Result<DensityMatrix<T>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            params,
            family: Family::Custom(Arc::new(eval)),
            strategy: DerivativeStrategy::FiniteDifference {
                step: T::lit(DEFAULT_FD_STEP),
            },
            domain: None,
        }
    }

    /// Constant family `ρ_θ = ρ`.
    pub fn constant(rho: DensityMatrix<T>, params: usize) -> Self {
        let dim = rho.dim();
        let zeros = vec![HermitianOperator::zeros(dim); params];
        Self::custom(dim, params, move |_| Ok(rho.clone()))
            .with_strategy(DerivativeStrategy::Explicit(Arc::new(move |_| Ok(zeros.clone()))))
            .expect("explicit strategy is always valid")
    }

    pub fn with_strategy(mut self, strategy: DerivativeStrategy<T>) -> Result<Self> {
        if matches!(strategy, DerivativeStrategy::AnalyticUnitary) && !matches!(self.family, Family::Unitary(_)) {
            return Err(Error::Unsupported("analytic derivatives need a unitary family".into()));
        }
        if let DerivativeStrategy::FiniteDifference { step } = &strategy {
            if !(*step > T::zero()) {
                return Err(Error::StepUnderflow {
                    param: 0,
                    step: step.to_f64_lossy(),
                });
            }
        }
        self.strategy = strategy;
        Ok(self)
    }

    /// Restricts the admissible parameter box.
    pub fn with_domain(mut self, domain: Vec<(T, T)>) -> Result<Self> {
        if domain.len() != self.params {
            return Err(Error::DimensionMismatch {
                what: "domain box",
                expected: self.params,
                found: domain.len(),
            });
        }
        self.domain = Some(domain);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> usize {
        self.params
    }

    pub fn domain(&self) -> Option<&[(T, T)]> {
        self.domain.as_deref()
    }

    pub fn strategy(&self) -> &DerivativeStrategy<T> {
        &self.strategy
    }

    pub fn unitary_family(&self) -> Option<&UnitaryFamily<T>> {
        match &self.family {
            Family::Unitary(f) => Some(f),
            Family::Custom(_) => None,
        }
    }

    fn check_theta(&self, theta: &[T]) -> Result<()> {
        if theta.len() != self.params {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.params,
                found: theta.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, theta: &[T]) -> Result<DensityMatrix<T>> {
        self.check_theta(theta)?;
        let rho = match &self.family {
            Family::Unitary(f) => f.evaluate(theta),
            Family::Custom(eval) => eval(theta)?,
        };
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "model evaluation",
                expected: self.dim,
                found: rho.dim(),
            });
        }
        Ok(rho)
    }

    /// `∂_j ρ_θ` for every parameter.
    pub fn state_derivatives(&self, theta: &[T]) -> Result<Vec<HermitianOperator<T>>> {
        self.check_theta(theta)?;
        match &self.strategy {
            DerivativeStrategy::AnalyticUnitary => match &self.family {
                Family::Unitary(f) => Ok(f.derivatives(theta)),
                Family::Custom(_) => Err(Error::Unsupported("analytic derivatives need a unitary family".into())),
            },
            DerivativeStrategy::Explicit(cb) => {
                let ds = cb(theta)?;
                if ds.len() != self.params {
                    return Err(Error::DimensionMismatch {
                        what: "explicit derivatives",
                        expected: self.params,
                        found: ds.len(),
                    });
                }
                Ok(ds)
            }
            DerivativeStrategy::FiniteDifference { step } => self.central_differences(theta, *step),
        }
    }

    fn central_differences(&self, theta: &[T], h: T) -> Result<Vec<HermitianOperator<T>>> {
        let mut out = Vec::with_capacity(self.params);
        let half = h * T::lit(0.5);
        for j in 0..self.params {
            let tj = theta[j];
            if !(half > T::zero()) || tj + half == tj {
                return Err(Error::StepUnderflow {
                    param: j,
                    step: half.to_f64_lossy(),
                });
            }
            if let Some(dom) = &self.domain {
                let (lo, hi) = dom[j];
                if tj - h < lo || tj + h > hi {
                    return Err(Error::DomainBoundary {
                        param: j,
                        value: tj.to_f64_lossy(),
                    });
                }
            }
            let coarse = self.central(theta, j, h)?;
            let fine = self.central(theta, j, half)?;
            // Richardson: (4 D(h/2) − D(h)) / 3
            let refined = (fine * Complex::new(T::lit(4.0), T::zero()) - coarse)
                * Complex::new(T::one() / T::lit(3.0), T::zero());
            out.push(HermitianOperator::symmetrized(refined));
        }
        Ok(out)
    }

    fn central(&self, theta: &[T], j: usize, h: T) -> Result<CMatrix<T>> {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let rp = self.evaluate(&plus)?;
        let rm = self.evaluate(&minus)?;
        Ok((rp.matrix() - rm.matrix()) * Complex::new(T::one() / (h + h), T::zero()))
    }
}

/// Born-rule probabilities `Tr[ρ E_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T: Real> {
    values: Vec<T>,
}

impl<T: Real> ProbabilityVector<T> {
    /// Clips values in `[−1e-12, 0)` to zero and renormalises; rejects
    /// anything more negative or a sum off by more than the tolerance.
    pub fn from_raw(raw: Vec<T>) -> Result<Self> {
        let clip = scaled::<T>(tolerance::PROBABILITY_CLIP);
        let mut values = raw;
        for (k, v) in values.iter_mut().enumerate() {
            if *v < -clip {
                return Err(Error::NegativeProbability {
                    outcome: k,
                    value: v.to_f64_lossy(),
                });
            }
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        let sum = values.iter().fold(T::zero(), |a, &v| a + v);
        if (sum - T::one()).abs() > scaled::<T>(tolerance::PROBABILITY_SUM) {
            return Err(Error::ProbabilitySum {
                sum: sum.to_f64_lossy(),
            });
        }
        values.iter_mut().for_each(|v| *v /= sum);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_povm<T: Real>(model: &ParametricModel<T>, povm: &Povm<T>) -> Result<()> {
    if povm.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "POVM dimension",
            expected: model.dim(),
            found: povm.dim(),
        });
    }
    Ok(())
}

/// Born-rule probabilities for a fixed state.
pub fn probabilities_of<T: Real>(rho: &DensityMatrix<T>, povm: &Povm<T>) -> Result<ProbabilityVector<T>> {
    if povm.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            what: "POVM dimension",
            expected: rho.dim(),
            found: povm.dim(),
        });
    }
    let raw = povm
        .elements()
        .iter()
        .map(|e| crate::linalg::trace_product(rho.matrix(), e.matrix()).re)
        .collect();
    ProbabilityVector::from_raw(raw)
}

/// `P(k|θ) = Tr[ρ_θ E_k]`.
pub fn probabilities<T: Real>(model: &ParametricModel<T>, povm: &Povm<T>, theta: &[T]) -> Result<ProbabilityVector<T>> {
    check_povm(model, povm)?;
    probabilities_of(&model.evaluate(theta)?, povm)
}

/// `∂_j ρ_θ`.
pub fn state_derivatives<T: Real>(model: &ParametricModel<T>, theta: &[T]) -> Result<Vec<HermitianOperator<T>>> {
    model.state_derivatives(theta)
}

/// Probabilities together with `∂_j P(k|θ)`, indexed `[k][j]`.
pub fn probability_jacobian<T: Real>(
    model: &ParametricModel<T>,
    povm: &Povm<T>,
    theta: &[T],
) -> Result<(ProbabilityVector<T>, Vec<Vec<T>>)> {
    check_povm(model, povm)?;
    let p = probabilities(model, povm, theta)?;
    let ds = model.state_derivatives(theta)?;
    let jac = povm
        .elements()
        .iter()
        .map(|e| {
            ds.iter()
                .map(|d| crate::linalg::trace_product(d.matrix(), e.matrix()).re)
                .collect()
        })
        .collect();
    Ok((p, jac))
}
