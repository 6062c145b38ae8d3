//! Grid posteriors over a parameter box, sequential Bayes updates and the
//! posterior covariance.
//!
//! Weights are carried as log-weights with compensated summation, so long
//! outcome sequences neither underflow nor depend on their order beyond
//! rounding of the final exponentials.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::classical_fim;
use crate::error::{Error, Result};
use crate::estimation::rng_for;
use crate::model::{probabilities, ParametricModel};
use crate::Povm64;

/// Posterior mass below which an observation is declared impossible.
pub const MIN_MASS: f64 = 1e-300;

/// Grid points per axis for `d = 1, 2, 3`.
pub fn default_resolution(d: usize) -> Result<usize> {
    match d {
        1 => Ok(2001),
        2 => Ok(301),
        3 => Ok(61),
        _ => Err(Error::Unsupported(format!(
            "posterior grids cover 1 to 3 parameters, got {d}"
        ))),
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn new(x: f64) -> Self {
        Self { sum: x, carry: 0.0 }
    }

    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Posterior on a tensor grid (first axis slowest).
#[derive(Debug, Clone)]
pub struct PosteriorGrid {
    axes: Vec<Vec<f64>>,
    log_w: Vec<Compensated>,
    weights: Vec<f64>,
    log_z: f64,
    updates: usize,
}

impl PosteriorGrid {
    /// Uniform prior on cell centres of `resolution` cells per axis.
    pub fn uniform(domain: &[(f64, f64)], resolution: usize) -> Result<Self> {
        if domain.is_empty() || domain.len() > 3 {
            return Err(Error::Unsupported(format!(
                "posterior grids cover 1 to 3 parameters, got {}",
                domain.len()
            )));
        }
        if resolution == 0 {
            return Err(Error::InvalidInput("grid resolution must be positive".into()));
        }
        if let Some((lo, hi)) = domain
            .iter()
            .find(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::InvalidInput(format!("empty domain interval [{lo}, {hi}]")));
        }
        let axes = domain
            .iter()
            .map(|&(lo, hi)| {
                let h = (hi - lo) / resolution as f64;
                (0..resolution).map(|i| lo + (i as f64 + 0.5) * h).collect()
            })
            .collect();
        let nodes = resolution.pow(domain.len() as u32);
        Self::new(axes, vec![1.0; nodes])
    }

    /// Arbitrary axes and non-negative (unnormalised) prior weights.
    pub fn new(axes: Vec<Vec<f64>>, prior: Vec<f64>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 || axes.iter().any(|a| a.is_empty()) {
            return Err(Error::InvalidInput("posterior grids need 1 to 3 non-empty axes".into()));
        }
        let nodes: usize = axes.iter().map(|a| a.len()).product();
        if prior.len() != nodes {
            return Err(Error::DimensionMismatch {
                what: "prior weights",
                expected: nodes,
                found: prior.len(),
            });
        }
        if prior.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(
                "prior weights must be finite and non-negative".into(),
            ));
        }
        let log_w: Vec<Compensated> = prior.iter().map(|w| Compensated::new(w.ln())).collect();
        let mut grid = Self {
            axes,
            weights: vec![0.0; nodes],
            log_w,
            log_z: 0.0,
            updates: 0,
        };
        grid.renormalize();
        if !(grid.log_z >= MIN_MASS.ln()) {
            return Err(Error::InvalidInput("prior has no mass".into()));
        }
        Ok(grid)
    }

    /// Normalised weights from the log-weights `lw`; returns `log Σ exp(lw)`.
    fn normalize_into(weights: &mut [f64], lw: impl Iterator<Item = f64>) -> f64 {
        let mut top = f64::NEG_INFINITY;
        for (w, l) in weights.iter_mut().zip(lw) {
            *w = l;
            top = top.max(l);
        }
        if top == f64::NEG_INFINITY {
            return top;
        }
        let mut total = Compensated::default();
        for w in weights.iter_mut() {
            *w = (*w - top).exp();
            total.add(*w);
        }
        let total = total.value();
        weights.iter_mut().for_each(|w| *w /= total);
        top + total.ln()
    }

    fn renormalize(&mut self) {
        self.log_z = Self::normalize_into(&mut self.weights, self.log_w.iter().map(Compensated::value));
    }

    pub fn params(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        let mut theta = vec![0.0; self.axes.len()];
        let mut rest = idx;
        for (j, axis) in self.axes.iter().enumerate().rev() {
            theta[j] = axis[rest % axis.len()];
            rest /= axis.len();
        }
        theta
    }

    /// Multiplies the weights by `exp(log_l)` node by node.
    pub fn update_log_likelihood(&mut self, log_l: &[f64], outcome: usize) -> Result<()> {
        if log_l.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "likelihood values",
                expected: self.len(),
                found: log_l.len(),
            });
        }
        let mut next = vec![0.0; self.len()];
        let log_z = Self::normalize_into(&mut next, self.log_w.iter().zip(log_l).map(|(w, l)| w.value() + l));
        // Mass of the observation under the current posterior.
        if !(log_z - self.log_z >= MIN_MASS.ln()) {
            return Err(Error::ImpossibleOutcome { outcome });
        }
        for (lw, &l) in self.log_w.iter_mut().zip(log_l) {
            lw.add(l);
        }
        self.weights = next;
        self.log_z = log_z;
        self.updates += 1;
        Ok(())
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.params();
        let mut acc = vec![Compensated::default(); d];
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (a, t) in acc.iter_mut().zip(self.node(i)) {
                a.add(w * t);
            }
        }
        acc.iter().map(Compensated::value).collect()
    }

    /// Highest-weight node, lowest index on ties.
    pub fn mode(&self) -> Vec<f64> {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        self.node(best)
    }
}

/// Log-probabilities of every outcome at every node of a posterior grid.
#[derive(Debug, Clone)]
pub struct LikelihoodTable {
    /// `[outcome][node]`.
    log_p: Vec<Vec<f64>>,
}

impl LikelihoodTable {
    pub fn new(model: &ParametricModel<f64>, povm: &Povm64, grid: &PosteriorGrid) -> Result<Self> {
        if model.params() != grid.params() {
            return Err(Error::DimensionMismatch {
                what: "grid parameters",
                expected: model.params(),
                found: grid.params(),
            });
        }
        let per_node = (0..grid.len())
            .into_par_iter()
            .map(|i| probabilities(model, povm, &grid.node(i)).map(|p| p.values().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let log_p = (0..povm.len())
            .map(|k| per_node.iter().map(|p| p[k].ln()).collect())
            .collect();
        Ok(Self { log_p })
    }

    pub fn outcomes(&self) -> usize {
        self.log_p.len()
    }

    pub fn outcome(&self, k: usize) -> Result<&[f64]> {
        self.log_p
            .get(k)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidInput(format!("outcome {k} is outside a {}-outcome POVM", self.log_p.len())))
    }
}

/// One Bayes step, evaluating the likelihood on the fly.
pub fn bayes_update(
    post: &PosteriorGrid,
    model: &ParametricModel<f64>,
    povm: &Povm64,
    outcome: usize,
) -> Result<PosteriorGrid> {
    if outcome >= povm.len() {
        return Err(Error::InvalidInput(format!(
            "outcome {outcome} is outside a {}-outcome POVM",
            povm.len()
        )));
    }
    let table = LikelihoodTable::new(model, povm, post)?;
    let mut next = post.clone();
    next.update_log_likelihood(table.outcome(outcome)?, outcome)?;
    Ok(next)
}

/// `Σ_ϑ P(ϑ|k) (θ_ref − ϑ)(θ_ref − ϑ)ᵀ`.
pub fn bayes_covariance(post: &PosteriorGrid, theta_ref: &[f64]) -> Result<DMatrix<f64>> {
    let d = post.params();
    if theta_ref.len() != d {
        return Err(Error::DimensionMismatch {
            what: "reference point",
            expected: d,
            found: theta_ref.len(),
        });
    }
    let mut acc = vec![Compensated::default(); d * d];
    for (i, &w) in post.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let diff: Vec<f64> = theta_ref.iter().zip(post.node(i)).map(|(r, t)| r - t).collect();
        for a in 0..d {
            for b in 0..d {
                acc[a * d + b].add(w * diff[a] * diff[b]);
            }
        }
    }
    Ok(DMatrix::from_fn(d, d, |a, b| acc[a * d + b].value()))
}

/// Covariance about the posterior mean. Not the reference-point covariance:
/// it omits the squared offset of the mean from the true value.
pub fn posterior_spread(post: &PosteriorGrid) -> DMatrix<f64> {
    bayes_covariance(post, &post.mean()).expect("mean has the grid dimension")
}

/// Total-variation distance between the posterior and the normal density
/// with the same mean and spread, discretised on the grid.
pub fn gaussian_residual(post: &PosteriorGrid) -> f64 {
    let mean = DVector::from_vec(post.mean());
    let spread = posterior_spread(post);
    let Some(inv) = spread.clone().try_inverse() else {
        return f64::NAN;
    };
    let g: Vec<f64> = (0..post.len())
        .map(|i| {
            let x = DVector::from_vec(post.node(i)) - &mean;
            (-0.5 * (x.transpose() * &inv * &x)[(0, 0)]).exp()
        })
        .collect();
    let total: f64 = g.iter().sum();
    if !(total > 0.0) {
        return f64::NAN;
    }
    0.5 * post
        .weights
        .iter()
        .zip(&g)
        .map(|(w, gi)| (w - gi / total).abs())
        .sum::<f64>()
}

/// Draws `m` i.i.d. outcome indices from the Born probabilities.
pub fn sample_sequence(p: &[f64], m: usize, seed: u64, stream: u64) -> Result<Vec<usize>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    let dist = WeightedIndex::new(p).map_err(|e| Error::InvalidInput(format!("outcome weights: {e}")))?;
    let mut rng = rng_for(seed, stream);
    Ok((0..m).map(|_| dist.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub theta_true: Vec<f64>,
    pub m: usize,
    pub seed: u64,
    pub resolution: usize,
    /// Posterior covariance about `θ_true`.
    pub c_b: Vec<Vec<f64>>,
    /// Posterior covariance about the posterior mean.
    pub spread: Vec<Vec<f64>>,
    /// `F⁻¹/m`; empty when `m = 0`.
    pub crb: Vec<Vec<f64>>,
    /// Element-wise `C_B / (F⁻¹/m)`.
    pub ratio: Vec<Vec<f64>>,
    /// Element-wise `spread / (F⁻¹/m)`.
    pub spread_ratio: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub mode: Vec<f64>,
    pub gaussian_residual: f64,
    /// Fewer than 10³ updates: the normal approximation is not expected to hold.
    pub pre_asymptotic: bool,
}

pub struct AsymptoticConfig<'a> {
    pub model: &'a ParametricModel<f64>,
    pub povm: &'a Povm64,
    pub theta: &'a [f64],
    pub m: usize,
    pub seed: u64,
    pub domain: &'a [(f64, f64)],
    pub resolution: usize,
}

/// Snapshot hook: called with `(step, posterior)` after the prior (step 0)
/// and after every update.
pub type Observer<'a> = dyn FnMut(usize, &PosteriorGrid) -> Result<()> + 'a;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn asymptotic_check(cfg: &AsymptoticConfig) -> Result<(AsymptoticReport, PosteriorGrid)> {
    asymptotic_check_observed(cfg, &mut |_, _| Ok(()))
}

pub fn asymptotic_check_observed(
    cfg: &AsymptoticConfig,
    observer: &mut Observer,
) -> Result<(AsymptoticReport, PosteriorGrid)> {
    let d = cfg.model.params();
    if cfg.theta.len() != d {
        return Err(Error::DimensionMismatch {
            what: "θ",
            expected: d,
            found: cfg.theta.len(),
        });
    }
    let mut post = PosteriorGrid::uniform(cfg.domain, cfg.resolution)?;
    let table = LikelihoodTable::new(cfg.model, cfg.povm, &post)?;
    let p = probabilities(cfg.model, cfg.povm, cfg.theta)?;
    let outcomes = sample_sequence(p.values(), cfg.m, cfg.seed, 0)?;
    observer(0, &post)?;
    for (step, &k) in outcomes.iter().enumerate() {
        post.update_log_likelihood(table.outcome(k)?, k)?;
        observer(step + 1, &post)?;
    }

    let c_b = bayes_covariance(&post, cfg.theta)?;
    let spread = posterior_spread(&post);
    let (crb, ratio, spread_ratio) = if cfg.m > 0 {
        let crb = classical_fim(cfg.model, cfg.povm, cfg.theta)?.pinv() / cfg.m as f64;
        let ratio = c_b.component_div(&crb);
        let spread_ratio = spread.component_div(&crb);
        (rows(&crb), rows(&ratio), rows(&spread_ratio))
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    let report = AsymptoticReport {
        theta_true: cfg.theta.to_vec(),
        m: cfg.m,
        seed: cfg.seed,
        resolution: cfg.resolution,
        c_b: rows(&c_b),
        spread: rows(&spread),
        crb,
        ratio,
        spread_ratio,
        mean: post.mean(),
        mode: post.mode(),
        gaussian_residual: gaussian_residual(&post),
        pre_asymptotic: cfg.m < 1000,
    };
    Ok((report, post))
}

/// Posterior snapshot rows `step,grid_index,theta_0,…,weight`.
pub fn write_posterior_csv<W: Write>(
    out: &mut W,
    step: usize,
    post: &PosteriorGrid,
    header: bool,
) -> std::io::Result<()> {
    if header {
        let mut cols = vec!["step".to_string(), "grid_index".to_string()];
        cols.extend((0..post.params()).map(|j| format!("theta_{j}")));
        cols.push("weight".into());
        writeln!(out, "{}", cols.join(","))?;
    }
    for (i, w) in post.weights.iter().enumerate() {
        write!(out, "{step},{i}")?;
        for t in post.node(i) {
            write!(out, ",{t:e}")?;
        }
        writeln!(out, ",{w:e}")?;
    }
    Ok(())
}
