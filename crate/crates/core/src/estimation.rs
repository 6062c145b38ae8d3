//! Monte-Carlo outcome sampling, grid maximum-likelihood estimation and
//! empirical checks of Cramér–Rao saturation.
//!
//! Every trial draws from its own ChaCha8 stream keyed by `(seed, trial)`, so
//! trials run in parallel yet reproduce bit for bit.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{classical_fim, qfim};
use crate::error::{Error, Result};
use crate::model::{probabilities, ParametricModel};
use crate::Povm64;

/// Grid points per axis when none is given.
pub const DEFAULT_RESOLUTION: usize = 2001;
/// Below this many shots the asymptotic Cramér–Rao comparison is not meaningful.
pub const ASYMPTOTIC_SHOTS: usize = 100;
pub const MIN_TRIALS: usize = 100;
/// Grid estimation covers at most this many parameters.
pub const MAX_GRID_PARAMS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub seed: u64,
    pub stream: u64,
    pub theta_true: Vec<f64>,
    pub counts: Vec<u64>,
    pub m: u64,
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multinomial draw of `m` shots as a chain of conditional binomials.
pub fn multinomial(p: &[f64], m: u64, rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; p.len()];
    let mut left = m;
    let mut mass = 1.0f64;
    for (k, &pk) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == p.len() {
            counts[k] = left;
            break;
        }
        let q = if mass > 0.0 { (pk / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q)
            .map_err(|e| Error::InvalidInput(format!("binomial({left}, {q}): {e}")))?
            .sample(rng);
        counts[k] = draw;
        left -= draw;
        mass -= pk;
    }
    Ok(counts)
}

pub fn sample_outcomes(
    model: &ParametricModel<f64>,
    povm: &Povm64,
    theta: &[f64],
    m: u64,
    seed: u64,
) -> Result<OutcomeRecord> {
    sample_outcomes_stream(model, povm, theta, m, seed, 0)
}

pub fn sample_outcomes_stream(
    model: &ParametricModel<f64>,
    povm: &Povm64,
    theta: &[f64],
    m: u64,
    seed: u64,
    stream: u64,
) -> Result<OutcomeRecord> {
    let p = probabilities(model, povm, theta)?;
    sample_from(p.values(), theta, m, seed, stream)
}

fn sample_from(p: &[f64], theta: &[f64], m: u64, seed: u64, stream: u64) -> Result<OutcomeRecord> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    let counts = multinomial(p, m, &mut rng_for(seed, stream))?;
    Ok(OutcomeRecord {
        seed,
        stream,
        theta_true: theta.to_vec(),
        counts,
        m,
    })
}

/// `Σ_k n_k log p_k`, with `0·log 0 = 0`.
pub fn log_likelihood(counts: &[u64], log_p: &[f64]) -> f64 {
    counts
        .iter()
        .zip(log_p)
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &lp)| n as f64 * lp)
        .sum()
}

/// Log-probabilities of every outcome on a tensor grid over a domain box.
///
/// Nodes are ordered with the first axis varying slowest.
#[derive(Debug, Clone)]
pub struct LikelihoodGrid {
    axes: Vec<Vec<f64>>,
    log_p: Vec<Vec<f64>>,
    outcomes: usize,
}

impl LikelihoodGrid {
    pub fn new(model: &ParametricModel<f64>, povm: &Povm64, domain: &[(f64, f64)], resolution: usize) -> Result<Self> {
        let d = model.params();
        if domain.len() != d {
            return Err(Error::DimensionMismatch {
                what: "domain box",
                expected: d,
                found: domain.len(),
            });
        }
        if d > MAX_GRID_PARAMS {
            return Err(Error::Unsupported(format!(
                "grid estimation handles at most {MAX_GRID_PARAMS} parameters, got {d}"
            )));
        }
        if resolution < 3 {
            return Err(Error::InvalidInput("grid resolution must be at least 3".into()));
        }
        if let Some((lo, hi)) = domain
            .iter()
            .find(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::InvalidInput(format!("empty domain interval [{lo}, {hi}]")));
        }
        let axes: Vec<Vec<f64>> = domain
            .iter()
            .map(|&(lo, hi)| {
                (0..resolution)
                    .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
                    .collect()
            })
            .collect();
        let nodes = resolution.pow(d as u32);
        let log_p = (0..nodes)
            .into_par_iter()
            .map(|idx| {
                let theta = node_theta(&axes, resolution, idx);
                probabilities(model, povm, &theta).map(|p| p.values().iter().map(|x| x.ln()).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self {
            axes,
            log_p,
            outcomes: povm.len(),
        })
    }

    pub fn params(&self) -> usize {
        self.axes.len()
    }

    pub fn resolution(&self) -> usize {
        self.axes[0].len()
    }

    pub fn nodes(&self) -> usize {
        self.log_p.len()
    }

    pub fn theta(&self, idx: usize) -> Vec<f64> {
        node_theta(&self.axes, self.resolution(), idx)
    }

    fn multi_index(&self, idx: usize) -> Vec<usize> {
        let r = self.resolution();
        let mut out = vec![0; self.params()];
        let mut rest = idx;
        for slot in out.iter_mut().rev() {
            *slot = rest % r;
            rest /= r;
        }
        out
    }

    fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.resolution() + i)
    }
}

fn node_theta(axes: &[Vec<f64>], resolution: usize, idx: usize) -> Vec<f64> {
    let mut theta = vec![0.0; axes.len()];
    let mut rest = idx;
    for (j, axis) in axes.iter().enumerate().rev() {
        theta[j] = axis[rest % resolution];
        rest /= resolution;
    }
    theta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    /// Best grid node (flat index, first axis slowest) and its coordinates.
    pub grid_index: usize,
    pub grid_theta: Vec<f64>,
    pub resolution: usize,
    /// Whether the parabolic refinement moved the estimate off the grid node.
    pub refined: bool,
    /// Another node attains the same log-likelihood; the lowest index was kept.
    pub tie: bool,
}

/// Grid argmax of the log-likelihood followed by one parabolic step per axis.
pub fn max_likelihood(
    record: &OutcomeRecord,
    model: &ParametricModel<f64>,
    povm: &Povm64,
    domain: &[(f64, f64)],
    resolution: usize,
) -> Result<EstimateRecord> {
    let grid = LikelihoodGrid::new(model, povm, domain, resolution)?;
    max_likelihood_on(record, &grid, model, povm)
}

/// As [`max_likelihood`] with a precomputed grid, for repeated trials.
pub fn max_likelihood_on(
    record: &OutcomeRecord,
    grid: &LikelihoodGrid,
    model: &ParametricModel<f64>,
    povm: &Povm64,
) -> Result<EstimateRecord> {
    if record.counts.len() != grid.outcomes {
        return Err(Error::DimensionMismatch {
            what: "outcome counts",
            expected: grid.outcomes,
            found: record.counts.len(),
        });
    }
    let ll: Vec<f64> = grid.log_p.iter().map(|lp| log_likelihood(&record.counts, lp)).collect();
    let mut best = 0;
    for (i, &v) in ll.iter().enumerate() {
        if v > ll[best] || (ll[best] == f64::NEG_INFINITY && v > f64::NEG_INFINITY) {
            best = i;
        }
    }
    let top = ll[best];
    if top == f64::NEG_INFINITY || top.is_nan() {
        return Err(Error::DegenerateLikelihood);
    }
    let tie = ll.iter().enumerate().any(|(i, &v)| i != best && v == top);

    let grid_theta = grid.theta(best);
    let mut theta_hat = grid_theta.clone();
    {
        let multi = grid.multi_index(best);
        for j in 0..grid.params() {
            let i = multi[j];
            if i == 0 || i + 1 == grid.resolution() {
                continue;
            }
            let mut lo = multi.clone();
            lo[j] = i - 1;
            let mut hi = multi.clone();
            hi[j] = i + 1;
            let (a, b, c) = (ll[grid.flat_index(&lo)], top, ll[grid.flat_index(&hi)]);
            let curv = a - 2.0 * b + c;
            if !(curv < 0.0) || !a.is_finite() || !c.is_finite() {
                continue;
            }
            let shift = (0.5 * (a - c) / curv).clamp(-0.5, 0.5);
            let h = grid.axes[j][1] - grid.axes[j][0];
            theta_hat[j] += shift * h;
        }
    }
    let mut loglik = top;
    let mut refined = false;
    if theta_hat != grid_theta {
        let p = probabilities(model, povm, &theta_hat)?;
        let lp: Vec<f64> = p.values().iter().map(|x| x.ln()).collect();
        let v = log_likelihood(&record.counts, &lp);
        if v >= top {
            loglik = v;
            refined = true;
        } else {
            theta_hat = grid_theta.clone();
        }
    }
    Ok(EstimateRecord {
        theta_hat,
        loglik,
        grid_index: best,
        grid_theta,
        resolution: grid.resolution(),
        refined,
        tie,
    })
}

/// `(1/n) Σ (θ_true − θ̂)(θ_true − θ̂)ᵀ`.
pub fn empirical_covariance(estimates: &[Vec<f64>], theta_true: &[f64]) -> Result<DMatrix<f64>> {
    if estimates.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "covariance needs at least two estimates, got {}",
            estimates.len()
        )));
    }
    let d = theta_true.len();
    let t = DVector::from_column_slice(theta_true);
    let mut c = DMatrix::zeros(d, d);
    for e in estimates {
        if e.len() != d {
            return Err(Error::DimensionMismatch {
                what: "estimate",
                expected: d,
                found: e.len(),
            });
        }
        let diff = &t - DVector::from_column_slice(e);
        c += &diff * diff.transpose();
    }
    Ok(c / estimates.len() as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SaturationRun {
    pub theta_true: Vec<f64>,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub resolution: usize,
    pub empirical_covariance: Vec<Vec<f64>>,
    /// Mean of `θ̂ − θ_true`; the ML estimator is not forced to be unbiased.
    pub bias: Vec<f64>,
    /// `F⁻¹/m` for the sampled POVM.
    pub crb: Vec<Vec<f64>>,
    /// `F_Q⁻¹/m`.
    pub qcrb: Vec<Vec<f64>>,
    /// `C_jj / (F⁻¹/m)_jj`.
    pub diagonal_ratio: Vec<f64>,
    /// `(C_jj − B_jj) / (B_jj √(2/trials))`, the deviation in units of the
    /// sampling error of a Gaussian variance estimate.
    pub z_scores: Vec<f64>,
    /// Off-diagonal entries in units of their sampling error `√(C_ii C_jj / trials)`.
    pub off_diagonal_z: Vec<Vec<f64>>,
    pub pre_asymptotic: bool,
    /// Trials where the maximum fell on a tie.
    pub ties: usize,
    #[serde(skip)]
    pub rows: Vec<TrialRow>,
}

pub struct SaturationConfig<'a> {
    pub model: &'a ParametricModel<f64>,
    pub povm: &'a Povm64,
    pub theta: &'a [f64],
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub domain: &'a [(f64, f64)],
    pub resolution: usize,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn saturation_report(cfg: &SaturationConfig) -> Result<SaturationRun> {
    if cfg.trials < MIN_TRIALS {
        return Err(Error::InvalidInput(format!(
            "a saturation report needs at least {MIN_TRIALS} trials, got {}",
            cfg.trials
        )));
    }
    if cfg.m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    let d = cfg.model.params();
    if cfg.theta.len() != d {
        return Err(Error::DimensionMismatch {
            what: "θ",
            expected: d,
            found: cfg.theta.len(),
        });
    }
    let grid = LikelihoodGrid::new(cfg.model, cfg.povm, cfg.domain, cfg.resolution)?;
    let p = probabilities(cfg.model, cfg.povm, cfg.theta)?;
    let rows = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let rec = sample_from(p.values(), cfg.theta, cfg.m as u64, cfg.seed, t as u64)?;
            let est = max_likelihood_on(&rec, &grid, cfg.model, cfg.povm)?;
            Ok((
                TrialRow {
                    trial: t,
                    theta_hat: est.theta_hat,
                    loglik: est.loglik,
                },
                est.tie,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let ties = rows.iter().filter(|(_, t)| *t).count();
    let rows: Vec<TrialRow> = rows.into_iter().map(|(r, _)| r).collect();
    let estimates: Vec<Vec<f64>> = rows.iter().map(|r| r.theta_hat.clone()).collect();
    let cov = empirical_covariance(&estimates, cfg.theta)?;

    let n = cfg.trials as f64;
    let bias: Vec<f64> = (0..d)
        .map(|j| estimates.iter().map(|e| e[j] - cfg.theta[j]).sum::<f64>() / n)
        .collect();
    let mf = cfg.m as f64;
    let crb = classical_fim(cfg.model, cfg.povm, cfg.theta)?.pinv() / mf;
    let qcrb = qfim(cfg.model, cfg.theta)?.qfim.pinv() / mf;
    let diagonal_ratio: Vec<f64> = (0..d).map(|j| cov[(j, j)] / crb[(j, j)]).collect();
    let z_scores = (0..d)
        .map(|j| (cov[(j, j)] - crb[(j, j)]) / (crb[(j, j)] * (2.0 / n).sqrt()))
        .collect();
    let off_diagonal_z = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        cov[(i, j)] / (cov[(i, i)] * cov[(j, j)] / n).sqrt()
                    }
                })
                .collect()
        })
        .collect();

    Ok(SaturationRun {
        theta_true: cfg.theta.to_vec(),
        m: cfg.m,
        trials: cfg.trials,
        seed: cfg.seed,
        resolution: grid.resolution(),
        empirical_covariance: rows_of(&cov),
        bias,
        crb: rows_of(&crb),
        qcrb: rows_of(&qcrb),
        diagonal_ratio,
        z_scores,
        off_diagonal_z,
        pre_asymptotic: cfg.m < ASYMPTOTIC_SHOTS,
        ties,
        rows,
    })
}

/// Per-trial CSV: `trial,theta_0,…,theta_{d−1},loglik`.
pub fn write_trials_csv<W: Write>(out: &mut W, rows: &[TrialRow]) -> std::io::Result<()> {
    let d = rows.first().map_or(0, |r| r.theta_hat.len());
    let mut header = vec!["trial".to_string()];
    header.extend((0..d).map(|j| format!("theta_{j}")));
    header.push("loglik".into());
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        write!(out, "{}", r.trial)?;
        for x in &r.theta_hat {
            write!(out, ",{x:e}")?;
        }
        writeln!(out, ",{:e}", r.loglik)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
