//! Fixed-particle-number Fock spaces, sparse multimode pure states and
//! number-diagonal phase encodings.

use std::collections::BTreeMap;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{DensityMatrix, HermitianOperator};
use crate::scalar::{CVector, Real};
use crate::tolerance::{self, scaled, DIMENSION_CAP};

/// Occupation numbers, one per mode.
pub type Occupation = Vec<u32>;

/// `C(n, k)` in floating point; exact for the sizes used here.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All occupation tuples of `modes` modes holding `total` particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockBasis {
    pub modes: usize,
    pub total_particles: u32,
}

impl FockBasis {
    pub fn new(modes: usize, total_particles: u32) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidInput("a Fock basis needs at least one mode".into()));
        }
        Ok(Self { modes, total_particles })
    }

    /// Multiset coefficient `C(N + M − 1, M − 1)`.
    pub fn len(&self) -> usize {
        binomial(
            self.total_particles as u64 + self.modes as u64 - 1,
            self.modes as u64 - 1,
        )
        .round() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, occ: &[u32]) -> bool {
        occ.len() == self.modes && occ.iter().map(|&n| n as u64).sum::<u64>() == self.total_particles as u64
    }

    /// Lexicographically ascending enumeration.
    pub fn occupations(&self) -> Vec<Occupation> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = vec![0u32; self.modes];
        fill(&mut out, &mut cur, 0, self.total_particles);
        out
    }

    /// Position of `occ` within [`FockBasis::occupations`].
    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        if !self.contains(occ) {
            return None;
        }
        // Count tuples that precede `occ` lexicographically.
        let mut idx = 0.0;
        let mut remaining = self.total_particles as u64;
        for (pos, &n) in occ.iter().enumerate().take(self.modes - 1) {
            let tail_modes = (self.modes - pos - 1) as u64;
            for smaller in 0..n as u64 {
                let rest = remaining - smaller;
                idx += binomial(rest + tail_modes - 1, tail_modes - 1);
            }
            remaining -= n as u64;
        }
        Some(idx.round() as usize)
    }
}

fn fill(out: &mut Vec<Occupation>, cur: &mut Occupation, pos: usize, remaining: u32) {
    if pos == cur.len() - 1 {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for n in 0..=remaining {
        cur[pos] = n;
        fill(out, cur, pos + 1, remaining - n);
    }
    cur[pos] = 0;
}

/// Normalised pure state stored as occupation → amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMultimodeState<T: Real> {
    basis: FockBasis,
    amplitudes: BTreeMap<Occupation, Complex<T>>,
}

impl<T: Real> SparseMultimodeState<T> {
    /// Validates normalisation and basis membership of every key.
    pub fn new(basis: FockBasis, amplitudes: BTreeMap<Occupation, Complex<T>>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::EmptyState);
        }
        if let Some(bad) = amplitudes.keys().find(|k| !basis.contains(k)) {
            return Err(Error::InvalidState(format!(
                "occupation {bad:?} is outside the {}-mode, {}-particle basis",
                basis.modes, basis.total_particles
            )));
        }
        let norm2 = amplitudes.values().fold(T::zero(), |a, z| a + z.norm_sqr());
        if (norm2 - T::one()).abs() > scaled::<T>(tolerance::NORMALIZATION) {
            return Err(Error::InvalidState(format!("norm² is {}", norm2.to_f64_lossy())));
        }
        Ok(Self { basis, amplitudes })
    }

    /// Rescales to unit norm, then validates. Zero amplitudes are dropped.
    pub fn normalized(basis: FockBasis, amplitudes: BTreeMap<Occupation, Complex<T>>) -> Result<Self> {
        let amplitudes: BTreeMap<_, _> = amplitudes
            .into_iter()
            .filter(|(_, z)| z.norm_sqr() > T::zero())
            .collect();
        let norm2 = amplitudes.values().fold(T::zero(), |a, z| a + z.norm_sqr());
        if norm2 == T::zero() {
            return Err(Error::EmptyState);
        }
        let s = T::one() / norm2.sqrt();
        let amplitudes = amplitudes.into_iter().map(|(k, z)| (k, z * s)).collect();
        Self::new(basis, amplitudes)
    }

    /// A single Fock state.
    pub fn fock(occupation: Occupation) -> Result<Self> {
        let basis = FockBasis::new(occupation.len(), occupation.iter().sum())?;
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(occupation, Complex::new(T::one(), T::zero()));
        Self::new(basis, amplitudes)
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn amplitudes(&self) -> &BTreeMap<Occupation, Complex<T>> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occ: &[u32]) -> Complex<T> {
        self.amplitudes
            .get(occ)
            .copied()
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    pub fn support_len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.values().fold(T::zero(), |a, z| a + z.norm_sqr())
    }

    /// Product state on the concatenated modes `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let basis = FockBasis::new(
            self.basis.modes + other.basis.modes,
            self.basis.total_particles + other.basis.total_particles,
        )?;
        let mut amplitudes = BTreeMap::new();
        for (a, za) in &self.amplitudes {
            for (b, zb) in &other.amplitudes {
                let mut occ = a.clone();
                occ.extend_from_slice(b);
                amplitudes.insert(occ, *za * *zb);
            }
        }
        // Renormalise away the rounding of the products.
        Self::normalized(basis, amplitudes)
    }

    /// `⟨ψ|φ⟩`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (k, z) in &self.amplitudes {
            if let Some(w) = other.amplitudes.get(k) {
                acc += z.conj() * *w;
            }
        }
        acc
    }
}

/// Number-diagonal generator `h(n) = Σ_k c_k n_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGenerator {
    pub coefficients: Vec<f64>,
}

impl DiagonalGenerator {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    /// `(n_a − n_b)/2`: relative phase between two modes.
    pub fn mode_difference(modes: usize, a: usize, b: usize) -> Self {
        let mut c = vec![0.0; modes];
        c[a] += 0.5;
        c[b] -= 0.5;
        Self { coefficients: c }
    }

    /// `n_j`: particle number in one mode.
    pub fn mode_number(modes: usize, j: usize) -> Self {
        let mut c = vec![0.0; modes];
        c[j] = 1.0;
        Self { coefficients: c }
    }

    pub fn modes(&self) -> usize {
        self.coefficients.len()
    }

    pub fn eigenvalue<T: Real>(&self, occ: &[u32]) -> T {
        let v: f64 = self.coefficients.iter().zip(occ).map(|(c, &n)| c * n as f64).sum();
        T::lit(v)
    }

    /// Dense diagonal operator on an ordered list of occupations.
    pub fn on_sector<T: Real>(&self, occupations: &[Occupation]) -> HermitianOperator<T> {
        let diag: Vec<T> = occupations.iter().map(|o| self.eigenvalue(o)).collect();
        HermitianOperator::diagonal(&diag)
    }
}

/// Multiplies every amplitude by `exp(−i Σ_j θ_j h_j(n))`.
pub fn apply_phase_encoding<T: Real>(
    state: &SparseMultimodeState<T>,
    generators: &[DiagonalGenerator],
    theta: &[T],
) -> Result<SparseMultimodeState<T>> {
    if generators.len() != theta.len() {
        return Err(Error::GeneratorCount {
            expected: theta.len(),
            found: generators.len(),
        });
    }
    if let Some(g) = generators.iter().find(|g| g.modes() != state.basis.modes) {
        return Err(Error::DimensionMismatch {
            what: "generator modes",
            expected: state.basis.modes,
            found: g.modes(),
        });
    }
    let amplitudes = state
        .amplitudes
        .iter()
        .map(|(occ, z)| {
            let phase = generators
                .iter()
                .zip(theta)
                .fold(T::zero(), |acc, (g, &t)| acc + t * g.eigenvalue::<T>(occ));
            let rot = Complex::new(phase.cos(), -phase.sin());
            (occ.clone(), *z * rot)
        })
        .collect();
    Ok(SparseMultimodeState {
        basis: state.basis,
        amplitudes,
    })
}

/// Which occupations the densified state is expressed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// Only the occupations carrying amplitude.
    #[default]
    Spanned,
    /// The whole fixed-particle-number basis.
    Full,
}

/// Dense representation of a sparse state on an ordered list of occupations.
#[derive(Debug, Clone)]
pub struct SectorState<T: Real> {
    pub occupations: Vec<Occupation>,
    pub vector: CVector<T>,
    pub density: DensityMatrix<T>,
}

impl<T: Real> SectorState<T> {
    pub fn dim(&self) -> usize {
        self.occupations.len()
    }

    pub fn generators(&self, gens: &[DiagonalGenerator]) -> Vec<HermitianOperator<T>> {
        gens.iter().map(|g| g.on_sector(&self.occupations)).collect()
    }
}

/// `|ψ⟩⟨ψ|` on the chosen sector.
pub fn density_from_pure<T: Real>(state: &SparseMultimodeState<T>, sector: Sector) -> Result<SectorState<T>> {
    density_from_pure_capped(state, sector, DIMENSION_CAP)
}

pub fn density_from_pure_capped<T: Real>(
    state: &SparseMultimodeState<T>,
    sector: Sector,
    cap: usize,
) -> Result<SectorState<T>> {
    if state.amplitudes.is_empty() {
        return Err(Error::EmptyState);
    }
    let occupations: Vec<Occupation> = match sector {
        Sector::Spanned => state.amplitudes.keys().cloned().collect(),
        Sector::Full => {
            let n = state.basis.len();
            if n > cap {
                return Err(Error::DimensionCap { dim: n, cap });
            }
            state.basis.occupations()
        }
    };
    if occupations.len() > cap {
        return Err(Error::DimensionCap {
            dim: occupations.len(),
            cap,
        });
    }
    let vector = CVector::from_iterator(occupations.len(), occupations.iter().map(|o| state.amplitude(o)));
    let density = DensityMatrix::from_pure(&vector)?;
    Ok(SectorState {
        occupations,
        vector,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn noon(n: u32) -> SparseMultimodeState<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut a = BTreeMap::new();
        a.insert(vec![n, 0], Complex::new(s, 0.0));
        a.insert(vec![0, n], Complex::new(s, 0.0));
        SparseMultimodeState::normalized(FockBasis::new(2, n).unwrap(), a).unwrap()
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let b = FockBasis::new(3, 2).unwrap();
        let occ = b.occupations();
        assert_eq!(occ.len(), 6);
        assert_eq!(occ[0], vec![0, 0, 2]);
        assert_eq!(occ[5], vec![2, 0, 0]);
        assert!(occ.windows(2).all(|w| w[0] < w[1]));
        for (i, o) in occ.iter().enumerate() {
            assert_eq!(b.index_of(o), Some(i));
        }
    }

    #[test]
    fn zero_phase_is_identity() {
        let psi = noon(3);
        let g = [DiagonalGenerator::mode_difference(2, 0, 1)];
        let out = apply_phase_encoding(&psi, &g, &[0.0]).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn noon_relative_phase() {
        let n = 3;
        let theta = 0.37;
        let psi = noon(n);
        let g = [DiagonalGenerator::mode_difference(2, 0, 1)];
        let out = apply_phase_encoding(&psi, &g, &[theta]).unwrap();
        // |N,0⟩ picks up e^{−iNθ/2}, |0,N⟩ picks up e^{+iNθ/2}.
        let a = out.amplitude(&[n, 0]);
        let b = out.amplitude(&[0, n]);
        let rel = a / b;
        let expected = Complex::new(0.0, -(n as f64) * theta).exp();
        assert!((rel - expected).norm() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a_expected = Complex::new(0.0, -(n as f64) * theta / 2.0).exp() * s;
        assert!((a - a_expected).norm() < 1e-12);
    }

    #[test]
    fn generator_count_mismatch() {
        let psi = noon(2);
        let g = [DiagonalGenerator::mode_difference(2, 0, 1)];
        assert!(matches!(
            apply_phase_encoding(&psi, &g, &[0.1, 0.2]),
            Err(Error::GeneratorCount { .. })
        ));
    }

    #[test]
    fn vacuum_density() {
        let psi = SparseMultimodeState::<f64>::fock(vec![1, 0]).unwrap();
        let s = density_from_pure(&psi, Sector::Full).unwrap();
        // Basis order: (0,1), (1,0).
        assert_eq!(s.occupations, vec![vec![0, 1], vec![1, 0]]);
        assert!((s.density.matrix()[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!(s.density.matrix()[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn two_term_state_is_rank_one() {
        let s = density_from_pure(&noon(2), Sector::Spanned).unwrap();
        assert_eq!(s.dim(), 2);
        assert!((s.density.purity() - 1.0).abs() < 1e-12);
        let spec = s.density.spectrum().unwrap();
        assert!(spec.values[0].abs() < 1e-12);
        assert!((spec.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn keys_outside_basis_rejected() {
        let mut a = BTreeMap::new();
        a.insert(vec![1, 1], Complex::new(1.0, 0.0));
        assert!(SparseMultimodeState::new(FockBasis::new(2, 3).unwrap(), a).is_err());
    }

    proptest! {
        #[test]
        fn basis_count_matches_formula(modes in 1usize..=6, n in 0u32..=8) {
            let b = FockBasis::new(modes, n).unwrap();
            let occ = b.occupations();
            prop_assert_eq!(occ.len(), b.len());
            let expected = binomial(n as u64 + modes as u64 - 1, modes as u64 - 1).round() as usize;
            prop_assert_eq!(occ.len(), expected);
            prop_assert!(occ.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn encoding_preserves_norm(thetas in proptest::collection::vec(-10.0f64..10.0, 2),
                                   amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 10)) {
            let basis = FockBasis::new(4, 3).unwrap();
            let occ = basis.occupations();
            let mut a = BTreeMap::new();
            for (o, (re, im)) in occ.iter().zip(amps) {
                a.insert(o.clone(), Complex::new(re, im));
            }
            prop_assume!(a.values().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3);
            let psi = SparseMultimodeState::normalized(basis, a).unwrap();
            let gens = [DiagonalGenerator::mode_difference(4, 0, 1), DiagonalGenerator::mode_difference(4, 2, 3)];
            let out = apply_phase_encoding(&psi, &gens, &thetas).unwrap();
            prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn densified_states_are_pure(amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6)) {
            let basis = FockBasis::new(3, 2).unwrap();
            let mut a = BTreeMap::new();
            for (o, (re, im)) in basis.occupations().iter().zip(amps) {
                a.insert(o.clone(), Complex::new(re, im));
            }
            prop_assume!(a.values().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3);
            let psi = SparseMultimodeState::normalized(basis, a).unwrap();
            let s = density_from_pure(&psi, Sector::Full).unwrap();
            prop_assert!((s.density.purity() - 1.0).abs() < 1e-12);
        }
    }
}
