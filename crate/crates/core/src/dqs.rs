//! Distributed-sensing probe states, sensor-network encodings and their
//! closed-form sensitivity limits.
//!
//! Local networks use `2d` modes ordered sensor-major `(a₁, b₁, a₂, b₂, …)`
//! with `H_j = (n_{a_j} − n_{b_j})/2`. Global networks use `d + 1` modes,
//! mode 0 being the reference, with `H_j = n_j`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::bounds::{qfim_pure, qfim_pure_fock, FisherMatrix};
use crate::error::{Error, Result};
use crate::fock::{density_from_pure, DiagonalGenerator, FockBasis, Occupation, Sector, SparseMultimodeState};
use crate::linalg::max_abs_real;
use crate::tolerance;

type State = SparseMultimodeState<f64>;

/// Largest occupation basis enumerated when building the multinomial probe.
const ENUMERATION_CAP: usize = 1 << 20;

/// Largest support densified for the dense-matrix cross-check. The dense
/// route diagonalises every generator, so beyond this it dominates runtime
/// without adding coverage.
pub const DENSE_CHECK_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Local,
    Global,
}

/// `d` sensors sharing either per-sensor (local) or a common (global) phase reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorNetwork {
    pub sensors: usize,
    pub reference: Reference,
    /// Per-sensor `N` for local networks, total `N_T` for global ones.
    pub particles: u32,
}

impl SensorNetwork {
    pub fn local(sensors: usize, per_sensor: u32) -> Result<Self> {
        Self::new(sensors, Reference::Local, per_sensor)
    }

    /// Local network with `N_T` split equally; uneven splits are rejected.
    pub fn local_with_total(sensors: usize, total: u32) -> Result<Self> {
        if sensors == 0 || !total.is_multiple_of(sensors as u32) {
            return Err(Error::InvalidInput(format!(
                "{total} particles cannot be split equally over {sensors} sensors"
            )));
        }
        Self::local(sensors, total / sensors as u32)
    }

    pub fn global(sensors: usize, total: u32) -> Result<Self> {
        Self::new(sensors, Reference::Global, total)
    }

    pub fn new(sensors: usize, reference: Reference, particles: u32) -> Result<Self> {
        let net = Self {
            sensors,
            reference,
            particles,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors == 0 {
            return Err(Error::InvalidInput("a sensor network needs d ≥ 1".into()));
        }
        if self.particles == 0 {
            return Err(Error::InvalidInput(
                "a sensor network needs at least one particle".into(),
            ));
        }
        Ok(())
    }

    pub fn modes(&self) -> usize {
        match self.reference {
            Reference::Local => 2 * self.sensors,
            Reference::Global => self.sensors + 1,
        }
    }

    pub fn total_particles(&self) -> u32 {
        match self.reference {
            Reference::Local => self.particles * self.sensors as u32,
            Reference::Global => self.particles,
        }
    }

    pub fn generators(&self) -> Vec<DiagonalGenerator> {
        let modes = self.modes();
        (0..self.sensors)
            .map(|j| match self.reference {
                Reference::Local => DiagonalGenerator::mode_difference(modes, 2 * j, 2 * j + 1),
                Reference::Global => DiagonalGenerator::mode_number(modes, j + 1),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeFamily {
    /// Product of single-particle splittings in every sensor.
    Msps,
    /// Product of per-sensor NOON states.
    Mspe,
    /// All particles independently spread over every mode of the network.
    Meps,
    /// Network-wide NOON-like state.
    Mepe,
    /// NOON-like superposition over the reference and `d` sensing modes.
    GeneralizedNoon,
}

impl ProbeFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Msps => "MSPS",
            Self::Mspe => "MSPE",
            Self::Meps => "MEPS",
            Self::Mepe => "MEPE",
            Self::GeneralizedNoon => "generalized NOON",
        }
    }

    pub fn reference(&self) -> Reference {
        match self {
            Self::GeneralizedNoon => Reference::Global,
            _ => Reference::Local,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub family: ProbeFamily,
    pub network: SensorNetwork,
    /// MEPE only: `−1` swaps the two branches in that sensor, targeting
    /// combinations whose coefficients carry that sign.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<i8>>,
}

impl ProbeSpec {
    pub fn new(family: ProbeFamily, network: SensorNetwork) -> Self {
        Self {
            family,
            network,
            signs: None,
        }
    }

    pub fn with_signs(mut self, signs: Vec<i8>) -> Self {
        self.signs = Some(signs);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.family.reference() != self.network.reference {
            return Err(Error::Unsupported(format!(
                "{} probes need a {:?} phase reference",
                self.family.name(),
                self.family.reference()
            )));
        }
        if let Some(s) = &self.signs {
            if self.family != ProbeFamily::Mepe {
                return Err(Error::Unsupported("sign patterns apply to MEPE probes only".into()));
            }
            if s.len() != self.network.sensors {
                return Err(Error::DimensionMismatch {
                    what: "sign pattern",
                    expected: self.network.sensors,
                    found: s.len(),
                });
            }
            if s.iter().any(|&x| x != 1 && x != -1) {
                return Err(Error::InvalidInput("signs must be ±1".into()));
            }
        }
        Ok(())
    }

    fn sign_pattern(&self) -> Vec<i8> {
        self.signs.clone().unwrap_or_else(|| vec![1; self.network.sensors])
    }
}

fn real(x: f64) -> Complex<f64> {
    Complex::new(x, 0.0)
}

/// `(|N,0⟩ + |0,N⟩)/√2` on one sensor.
fn noon(n: u32) -> Result<State> {
    let mut amps = BTreeMap::new();
    amps.insert(vec![n, 0], real(1.0));
    amps.insert(vec![0, n], real(1.0));
    State::normalized(FockBasis::new(2, n)?, amps)
}

/// `((|1,0⟩ + |0,1⟩)/√2)^{⊗N}` symmetrised onto two modes.
fn split_particles(n: u32) -> Result<State> {
    let scale = 0.5f64.powi(n as i32);
    let amps = (0..=n)
        .map(|k| {
            (
                vec![k, n - k],
                real((crate::fock::binomial(n as u64, k as u64) * scale).sqrt()),
            )
        })
        .collect();
    State::normalized(FockBasis::new(2, n)?, amps)
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Every particle independently and uniformly spread over all modes.
fn multinomial(modes: usize, n: u32) -> Result<State> {
    let basis = FockBasis::new(modes, n)?;
    if basis.len() > ENUMERATION_CAP {
        return Err(Error::DimensionCap {
            dim: basis.len(),
            cap: ENUMERATION_CAP,
        });
    }
    let ln_norm = ln_factorial(n) - n as f64 * (modes as f64).ln();
    let amps = basis
        .occupations()
        .into_iter()
        .map(|occ| {
            let ln_w = ln_norm - occ.iter().map(|&k| ln_factorial(k)).sum::<f64>();
            (occ, real((0.5 * ln_w).exp()))
        })
        .collect();
    State::normalized(basis, amps)
}

pub fn build_probe(spec: &ProbeSpec) -> Result<State> {
    spec.validate()?;
    let net = spec.network;
    let d = net.sensors;
    let n = net.particles;
    match spec.family {
        ProbeFamily::Msps | ProbeFamily::Mspe => {
            let local = if spec.family == ProbeFamily::Msps {
                split_particles(n)?
            } else {
                noon(n)?
            };
            let mut state = local.clone();
            for _ in 1..d {
                state = state.tensor(&local)?;
            }
            Ok(state)
        }
        ProbeFamily::Meps => multinomial(net.modes(), net.total_particles()),
        ProbeFamily::Mepe => {
            let signs = spec.sign_pattern();
            let mut up = Vec::with_capacity(2 * d);
            let mut down = Vec::with_capacity(2 * d);
            for &s in &signs {
                let (a, b) = if s > 0 { ([n, 0], [0, n]) } else { ([0, n], [n, 0]) };
                up.extend_from_slice(&a);
                down.extend_from_slice(&b);
            }
            let mut amps = BTreeMap::new();
            amps.insert(up, real(1.0));
            amps.insert(down, real(1.0));
            State::normalized(FockBasis::new(net.modes(), net.total_particles())?, amps)
        }
        ProbeFamily::GeneralizedNoon => {
            let df = d as f64;
            let alpha = 1.0 / (1.0 + df.sqrt()).sqrt();
            let beta = 1.0 / (df + df.sqrt()).sqrt();
            let mut amps = BTreeMap::new();
            for mode in 0..=d {
                let mut occ: Occupation = vec![0; d + 1];
                occ[mode] = n;
                amps.insert(occ, real(if mode == 0 { alpha } else { beta }));
            }
            State::new(FockBasis::new(d + 1, n)?, amps)
        }
    }
}

fn is_average(nu: &[f64]) -> bool {
    let d = nu.len() as f64;
    nu.iter().all(|&x| (x - 1.0 / d).abs() <= 1e-12)
}

fn check_direction(spec: &ProbeSpec, nu: &[f64], m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    if nu.len() != spec.network.sensors {
        return Err(Error::DimensionMismatch {
            what: "direction",
            expected: spec.network.sensors,
            found: nu.len(),
        });
    }
    Ok(())
}

/// Closed-form optimal variance of `νᵀθ` (or `Tr C` for the global scheme).
pub fn closed_form_sensitivity(spec: &ProbeSpec, nu: &[f64], m: usize) -> Result<f64> {
    spec.validate()?;
    let net = spec.network;
    let d = net.sensors as f64;
    let nt = net.total_particles() as f64;
    let mf = m as f64;
    if spec.family == ProbeFamily::GeneralizedNoon {
        if m == 0 {
            return Err(Error::InvalidInput("m must be at least 1".into()));
        }
        return Ok(d * (d.sqrt() + 1.0).powi(2) / (4.0 * nt * nt * mf));
    }
    check_direction(spec, nu, m)?;
    let unsupported = || Error::Unsupported(format!("no closed form for {} along ν = {nu:?}", spec.family.name()));
    match spec.family {
        ProbeFamily::Msps | ProbeFamily::Meps => {
            if !is_average(nu) {
                return Err(unsupported());
            }
            Ok(1.0 / (mf * nt))
        }
        ProbeFamily::Mspe => {
            if !is_average(nu) {
                return Err(unsupported());
            }
            Ok(d / (mf * nt * nt))
        }
        ProbeFamily::Mepe => {
            let signs = spec.sign_pattern();
            let matches = nu.iter().zip(&signs).all(|(&x, &s)| (x - s as f64 / d).abs() <= 1e-12);
            if !matches {
                return Err(unsupported());
            }
            Ok(1.0 / (mf * nt * nt))
        }
        ProbeFamily::GeneralizedNoon => unreachable!(),
    }
}

/// `‖ν‖²_{2/3} / ‖ν‖²_1`: the best MEPE-over-MSPE advantage along ν.
pub fn gain(nu: &[f64]) -> Result<f64> {
    let l1: f64 = nu.iter().map(|x| x.abs()).sum();
    if l1 == 0.0 {
        return Err(Error::ZeroVector);
    }
    // Rescaling by the largest entry keeps the fractional powers well conditioned.
    let top = nu.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let l23: f64 = nu.iter().map(|x| (x.abs() / top).powf(2.0 / 3.0)).sum();
    Ok(l23.powi(3) / (l1 / top).powi(2))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeVerification {
    pub family: ProbeFamily,
    pub network: SensorNetwork,
    pub nu: Vec<f64>,
    pub m: usize,
    pub closed_form: f64,
    /// `νᵀF⁺ν/m`, or `Tr F⁺/m` for the global scheme.
    pub numeric: f64,
    pub relative_deviation: f64,
    pub qfim: Vec<Vec<f64>>,
    pub qfim_rank: usize,
    pub support_size: usize,
    /// Relative gap between the occupation-statistics and dense-matrix QFIMs.
    pub dense_deviation: Option<f64>,
    /// `‖G_Q‖_max` from the dense path.
    pub g_q_max: Option<f64>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Recomputes the closed form from the probe's QFIM, cross-checking the
/// occupation-statistics route against the dense matrix route when small.
pub fn verify_probe(spec: &ProbeSpec, nu: &[f64], m: usize) -> Result<ProbeVerification> {
    spec.validate()?;
    let state = build_probe(spec)?;
    let gens = spec.network.generators();
    let f = qfim_pure_fock(&state, &gens)?;
    let global = spec.family == ProbeFamily::GeneralizedNoon;
    let mf = m as f64;

    let numeric = if global {
        if m == 0 {
            return Err(Error::InvalidInput("m must be at least 1".into()));
        }
        if !f.is_full_rank() {
            return Err(Error::Inestimable);
        }
        f.pinv().trace() / mf
    } else {
        check_direction(spec, nu, m)?;
        let v = DVector::from_column_slice(nu);
        if v.norm() == 0.0 {
            return Err(Error::ZeroVector);
        }
        if f.kernel_component(&v).norm() > tolerance::SATURATION * v.norm() {
            return Err(Error::Inestimable);
        }
        (v.transpose() * f.pinv() * &v)[(0, 0)] / mf
    };
    let closed_form = closed_form_sensitivity(spec, nu, m)?;

    let (dense_deviation, g_q_max) = if state.support_len() <= DENSE_CHECK_CAP {
        let (dev, g) = dense_cross_check(&state, &gens, &f)?;
        (Some(dev), Some(g))
    } else {
        (None, None)
    };

    Ok(ProbeVerification {
        family: spec.family,
        network: spec.network,
        nu: nu.to_vec(),
        m,
        closed_form,
        numeric,
        relative_deviation: (numeric - closed_form).abs() / closed_form.abs(),
        qfim: to_rows(f.matrix()),
        qfim_rank: f.rank(),
        support_size: state.support_len(),
        dense_deviation,
        g_q_max,
    })
}

fn dense_cross_check(state: &State, gens: &[DiagonalGenerator], f: &FisherMatrix<f64>) -> Result<(f64, f64)> {
    let sector = density_from_pure(state, Sector::Spanned)?;
    let hs = sector.generators(gens);
    let theta = vec![0.0; gens.len()];
    let dense = qfim_pure(&sector.vector, &hs, &theta)?;
    let scale = max_abs_real(f.matrix()).max(1.0);
    let dev = max_abs_real(&(dense.qfim.matrix() - f.matrix())) / scale;
    let g = 4.0 * max_abs_real(&dense.imaginary);
    Ok((dev, g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedAmplitude {
    pub occupation: Occupation,
    /// `[re, im]`.
    pub amplitude: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedState {
    pub modes: usize,
    pub particles: u32,
    pub amplitudes: Vec<ExportedAmplitude>,
}

impl ExportedState {
    pub fn from_state(state: &State) -> Self {
        let basis = state.basis();
        Self {
            modes: basis.modes,
            particles: basis.total_particles,
            amplitudes: state
                .amplitudes()
                .iter()
                .map(|(occ, z)| ExportedAmplitude {
                    occupation: occ.clone(),
                    amplitude: [z.re, z.im],
                })
                .collect(),
        }
    }

    pub fn into_state(self) -> Result<State> {
        let basis = FockBasis::new(self.modes, self.particles)?;
        let amps = self
            .amplitudes
            .into_iter()
            .map(|a| (a.occupation, Complex::new(a.amplitude[0], a.amplitude[1])))
            .collect();
        State::new(basis, amps)
    }
}

pub fn export_json(state: &State) -> String {
    serde_json::to_string_pretty(&ExportedState::from_state(state)).expect("plain data serialises")
}

pub fn import_json(s: &str) -> Result<State> {
    let e: ExportedState = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
    e.into_state()
}
