//! Exact dynamics of the driven interacting N-spin model
//!
//! H/ħ = −δ S^z − Σ_j Ω_j s^x_j − Σ_{j<k} U_jk (s_j·s_k − ¼)
//!
//! in the product basis where bit j of a basis index is 1 when atom j is in
//! |e⟩. Index 0 is |g…g⟩. Every matrix element is real, so the Hamiltonian is
//! stored as a real symmetric matrix and evolved through its real
//! eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{domain, ensure_finite, ensure_positive, Error, Result};
use crate::modes::{overlap_coefficient, rabi_frequency, ModeConfig};
use crate::physunits::TrapGeometry;

/// Largest atom number accepted by the dense solver (dimension 4096).
pub const MAX_SPINS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    omega0b: f64,
    detuning: f64,
    pulse_time: f64,
    target_excitation: f64,
}

impl DriveParams {
    pub fn new(omega0b: f64, detuning: f64, pulse_time: f64, target_excitation: f64) -> Result<Self> {
        ensure_positive("omega0B", omega0b)?;
        ensure_finite("detuning", detuning)?;
        ensure_positive("pulseTime", pulse_time)?;
        if !(target_excitation > 0.0 && target_excitation < 1.0) {
            return Err(domain(format!("targetExcitation must lie in (0,1), got {target_excitation}")));
        }
        Ok(Self { omega0b, detuning, pulse_time, target_excitation })
    }

    /// Drive whose bare Rabi frequency makes a π pulse of the given duration.
    pub fn pi_pulse(pulse_time: f64, target_excitation: f64) -> Result<Self> {
        ensure_positive("pulseTime", pulse_time)?;
        Self::new(std::f64::consts::PI / pulse_time, 0.0, pulse_time, target_excitation)
    }

    pub fn with_detuning(&self, detuning: f64) -> Result<Self> {
        Self::new(self.omega0b, detuning, self.pulse_time, self.target_excitation)
    }

    pub fn with_omega0b(&self, omega0b: f64) -> Result<Self> {
        Self::new(omega0b, self.detuning, self.pulse_time, self.target_excitation)
    }

    pub fn with_pulse_time(&self, pulse_time: f64) -> Result<Self> {
        Self::new(self.omega0b, self.detuning, pulse_time, self.target_excitation)
    }

    pub fn with_target(&self, target_excitation: f64) -> Result<Self> {
        Self::new(self.omega0b, self.detuning, self.pulse_time, target_excitation)
    }

    pub fn omega0b(&self) -> f64 {
        self.omega0b
    }
    pub fn detuning(&self) -> f64 {
        self.detuning
    }
    pub fn pulse_time(&self) -> f64 {
        self.pulse_time
    }
    pub fn target_excitation(&self) -> f64 {
        self.target_excitation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InteractionMode {
    /// U_jk = u·I_{n_j,n_k}/π for every pair.
    ExactPairwise,
    /// Every pair carries the mean Ū over pairs.
    MeanU,
}

/// Drive and interaction parameters of one site, independent of the detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinModel {
    rabi: Vec<f64>,
    couplings: DMatrix<f64>,
    detuning_offsets: Vec<f64>,
}

impl SpinModel {
    pub fn new(rabi: Vec<f64>, couplings: DMatrix<f64>) -> Result<Self> {
        let n = rabi.len();
        if n == 0 {
            return Err(domain("spin model needs at least one atom"));
        }
        if n > MAX_SPINS {
            return Err(Error::Capacity(format!("{n} atoms exceed the dense-solver limit of {MAX_SPINS}")));
        }
        if couplings.nrows() != n || couplings.ncols() != n {
            return Err(domain("coupling matrix must be N×N"));
        }
        for (j, &r) in rabi.iter().enumerate() {
            ensure_finite(&format!("Rabi frequency of atom {j}"), r)?;
        }
        for j in 0..n {
            for k in 0..n {
                ensure_finite("pair coupling", couplings[(j, k)])?;
                if (couplings[(j, k)] - couplings[(k, j)]).abs() > 1e-12 * couplings[(j, k)].abs().max(1.0) {
                    return Err(domain("coupling matrix must be symmetric"));
                }
            }
        }
        Ok(Self { rabi, couplings, detuning_offsets: vec![0.0; n] })
    }

    /// All pairs share the coupling `mean_u`.
    pub fn uniform(rabi: Vec<f64>, mean_u: f64) -> Result<Self> {
        let n = rabi.len();
        let mut couplings = DMatrix::from_element(n, n, mean_u);
        couplings.fill_diagonal(0.0);
        Self::new(rabi, couplings)
    }

    pub fn from_config(
        config: &ModeConfig,
        drive: &DriveParams,
        geometry: &TrapGeometry,
        mode: InteractionMode,
    ) -> Result<Self> {
        let n = config.len();
        if n > MAX_SPINS {
            return Err(Error::Capacity(format!("{n} atoms exceed the dense-solver limit of {MAX_SPINS}")));
        }
        let rabi: Vec<f64> = config
            .modes()
            .iter()
            .map(|&m| rabi_frequency(m, drive.omega0b(), geometry.eta_y(), geometry.eta_z()))
            .collect();
        let mut couplings = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in (j + 1)..n {
                let u = geometry.u() * overlap_coefficient(config.modes()[j], config.modes()[k]) / std::f64::consts::PI;
                couplings[(j, k)] = u;
                couplings[(k, j)] = u;
            }
        }
        let model = Self::new(rabi, couplings)?;
        Ok(match mode {
            InteractionMode::ExactPairwise => model,
            InteractionMode::MeanU => {
                let mean = model.mean_coupling();
                Self::uniform(model.rabi, mean)?
            }
        })
    }

    /// Per-atom detuning offsets δ_j added as −Σ_j δ_j s^z_j (user-supplied table).
    pub fn with_detuning_offsets(mut self, offsets: Vec<f64>) -> Result<Self> {
        if offsets.len() != self.rabi.len() {
            return Err(domain("one detuning offset per atom required"));
        }
        for &o in &offsets {
            ensure_finite("detuning offset", o)?;
        }
        self.detuning_offsets = offsets;
        Ok(self)
    }

    pub fn n_spins(&self) -> usize {
        self.rabi.len()
    }
    pub fn rabi(&self) -> &[f64] {
        &self.rabi
    }
    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.couplings
    }
    pub fn detuning_offsets(&self) -> &[f64] {
        &self.detuning_offsets
    }

    pub fn mean_rabi(&self) -> f64 {
        self.rabi.iter().sum::<f64>() / self.rabi.len() as f64
    }

    /// ΔΩ = √(ΣΩ_j²/N − Ω̄²).
    pub fn delta_rabi_std(&self) -> f64 {
        let n = self.rabi.len() as f64;
        let mean = self.mean_rabi();
        (self.rabi.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt()
    }

    /// Mean of U_jk over distinct pairs (0 for a single atom).
    pub fn mean_coupling(&self) -> f64 {
        let n = self.rabi.len();
        if n < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for j in 0..n {
            for k in (j + 1)..n {
                sum += self.couplings[(j, k)];
            }
        }
        sum / (n * (n - 1) / 2) as f64
    }

    pub fn hamiltonian(&self, detuning: f64) -> Result<DMatrix<f64>> {
        ensure_finite("detuning", detuning)?;
        let n = self.rabi.len();
        let dim = 1usize << n;
        let half_n = n as f64 / 2.0;
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for b in 0..dim {
            let ups = b.count_ones() as f64;
            let mut diag = -detuning * (ups - half_n);
            for j in 0..n {
                let sz = if b >> j & 1 == 1 { 0.5 } else { -0.5 };
                diag -= self.detuning_offsets[j] * sz;
                h[(b ^ (1 << j), b)] -= self.rabi[j] / 2.0;
                for k in (j + 1)..n {
                    let u = self.couplings[(j, k)];
                    if (b >> j & 1) != (b >> k & 1) {
                        diag += u / 2.0;
                        h[(b ^ (1 << j) ^ (1 << k), b)] -= u / 2.0;
                    }
                }
            }
            h[(b, b)] += diag;
        }
        Ok(h)
    }
}

#[derive(Debug, Clone)]
pub struct SpinHamiltonian {
    n_spins: usize,
    matrix: DMatrix<f64>,
    mode_labels: Option<ModeConfig>,
    interaction_mode: InteractionMode,
}

pub fn build_hamiltonian(
    config: &ModeConfig,
    drive: &DriveParams,
    geometry: &TrapGeometry,
    interaction_mode: InteractionMode,
) -> Result<SpinHamiltonian> {
    let model = SpinModel::from_config(config, drive, geometry, interaction_mode)?;
    let mut h = SpinHamiltonian::from_model(&model, drive.detuning(), interaction_mode)?;
    h.mode_labels = Some(config.clone());
    Ok(h)
}

impl SpinHamiltonian {
    pub fn from_model(model: &SpinModel, detuning: f64, interaction_mode: InteractionMode) -> Result<Self> {
        Ok(Self {
            n_spins: model.n_spins(),
            matrix: model.hamiltonian(detuning)?,
            mode_labels: None,
            interaction_mode,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }
    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn mode_labels(&self) -> Option<&ModeConfig> {
        self.mode_labels.as_ref()
    }
    pub fn interaction_mode(&self) -> InteractionMode {
        self.interaction_mode
    }

    /// max |H − H†| over elements.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).abs().max()
    }

    pub fn propagator(&self) -> Propagator {
        let eig = SymmetricEigen::new(self.matrix.clone());
        Propagator { n_spins: self.n_spins, energies: eig.eigenvalues, vectors: eig.eigenvectors }
    }
}

/// Spectral form of a Hamiltonian, reusable for many evolution times.
#[derive(Debug, Clone)]
pub struct Propagator {
    n_spins: usize,
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl Propagator {
    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// e^{−iHt}|g…g⟩.
    pub fn state_at(&self, t: f64) -> Result<SpinState> {
        ensure_finite("evolution time", t)?;
        let dim = self.energies.len();
        let mut amplitudes = DVector::<Complex64>::zeros(dim);
        for k in 0..dim {
            let c0 = self.vectors[(0, k)];
            if c0 == 0.0 {
                continue;
            }
            let phase = Complex64::from_polar(c0, -self.energies[k] * t);
            for i in 0..dim {
                amplitudes[i] += phase * self.vectors[(i, k)];
            }
        }
        Ok(SpinState { n_spins: self.n_spins, amplitudes })
    }
}

pub fn evolve(hamiltonian: &SpinHamiltonian, t: f64) -> Result<SpinState> {
    ensure_finite("evolution time", t)?;
    hamiltonian.propagator().state_at(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    n_spins: usize,
    amplitudes: DVector<Complex64>,
}

impl SpinState {
    pub fn new(n_spins: usize, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1 << n_spins {
            return Err(domain("state length must be 2^N"));
        }
        Ok(Self { n_spins, amplitudes })
    }

    pub fn all_ground(n_spins: usize) -> Self {
        let mut amplitudes = DVector::zeros(1 << n_spins);
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { n_spins, amplitudes }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }
    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨N^e⟩ = N/2 + ⟨S^z⟩.
    pub fn excited_number(&self) -> f64 {
        self.amplitudes.iter().enumerate().map(|(b, a)| a.norm_sqr() * f64::from(b.count_ones())).sum()
    }

    pub fn ground_number(&self) -> f64 {
        let n = self.n_spins as u32;
        self.amplitudes.iter().enumerate().map(|(b, a)| a.norm_sqr() * f64::from(n - b.count_ones())).sum()
    }

    /// ⟨S²⟩ of the total spin.
    pub fn total_spin_squared(&self) -> f64 {
        let n = self.n_spins;
        let mut acc = 0.0;
        for (b, a) in self.amplitudes.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            // diagonal: 3N/4 + Σ_{j≠k} s^z_j s^z_k
            let ups = f64::from(b.count_ones());
            let sz = ups - n as f64 / 2.0;
            let mut diag = sz * sz + n as f64 / 2.0;
            let mut off = Complex64::new(0.0, 0.0);
            for j in 0..n {
                for k in (j + 1)..n {
                    if (b >> j & 1) != (b >> k & 1) {
                        off += self.amplitudes[b ^ (1 << j) ^ (1 << k)];
                    }
                }
            }
            // S² = Sz² + N/2 + Σ_{j≠k} s^+_j s^-_k in the flip-flop form
            diag *= a.norm_sqr();
            acc += diag + (a.conj() * off).re;
        }
        acc
    }
}

/// (N/2 + ⟨S^z⟩)/N.
pub fn excited_fraction(state: &SpinState) -> f64 {
    state.excited_number() / state.n_spins as f64
}

/// Excitation fraction of a two-atom site after a pulse of length `t`.
///
/// In the basis (T0, (gg+ee)/√2, (gg−ee)/√2, S) the pair Hamiltonian is the
/// tridiagonal chain with couplings (−Ω̄, δ, −ΔΩ) and diagonal (0, 0, 0, U),
/// where Ω̄ and ΔΩ are the mean and half-difference of the two Rabi
/// frequencies. A fixed-size implicit QL sweep diagonalizes it.
pub fn pair_excitation(rabi: [f64; 2], coupling: f64, detuning: f64, t: f64) -> f64 {
    let mean = 0.5 * (rabi[0] + rabi[1]);
    let half_diff = 0.5 * (rabi[0] - rabi[1]);
    let mut diag = [0.0, 0.0, 0.0, coupling];
    let mut off = [-mean, detuning, -half_diff, 0.0];
    let mut vecs = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
    tridiagonal_ql(&mut diag, &mut off, &mut vecs);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = [Complex64::new(0.0, 0.0); 4];
    for k in 0..4 {
        // overlap with |gg⟩ = (P+ + P−)/√2
        let c = h * (vecs[1][k] + vecs[2][k]);
        if c == 0.0 {
            continue;
        }
        let phase = Complex64::from_polar(c, -diag[k] * t);
        for (i, p) in psi.iter_mut().enumerate() {
            *p += phase * vecs[i][k];
        }
    }
    let ee = psi[1] - psi[2];
    (psi[0].norm_sqr() + ee.norm_sqr() + psi[3].norm_sqr()) / 2.0
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// `diag` becomes the eigenvalues, `vecs[i][k]` component i of eigenvector k;
/// `off[i]` couples rows i and i+1.
fn tridiagonal_ql<const N: usize>(diag: &mut [f64; N], off: &mut [f64; N], vecs: &mut [[f64; N]; N]) {
    off[N - 1] = 0.0;
    for l in 0..N {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m < N - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 64 {
                break;
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = (f * f + g * g).sqrt();
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                for row in vecs.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_spin_matrix() {
        let m = SpinModel::uniform(vec![0.7], 0.0).unwrap();
        let h = m.hamiltonian(0.3).unwrap();
        // reorder to (e, g) and move the origin to the g level
        let e_first = DMatrix::from_row_slice(2, 2, &[h[(1, 1)], h[(1, 0)], h[(0, 1)], h[(0, 0)]]);
        let shifted = e_first - DMatrix::identity(2, 2) * h[(1, 1)];
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, -0.35, -0.35, 0.3]);
        assert!((shifted - expected).abs().max() < 1e-15);
    }

    #[test]
    fn pi_pulse_inverts_single_spin() {
        let omega = 2.3;
        let m = SpinModel::uniform(vec![omega], 0.0).unwrap();
        let h = SpinHamiltonian::from_model(&m, 0.0, InteractionMode::MeanU).unwrap();
        let s = evolve(&h, PI / omega).unwrap();
        assert!((excited_fraction(&s) - 1.0).abs() < 1e-12);
        let s0 = evolve(&h, 0.0).unwrap();
        assert!((s0.amplitudes()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn excited_fraction_extremes() {
        assert_eq!(excited_fraction(&SpinState::all_ground(3)), 0.0);
        let mut amps = DVector::zeros(8);
        amps[7] = Complex64::new(1.0, 0.0);
        assert_eq!(excited_fraction(&SpinState::new(3, amps).unwrap()), 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = SpinState::new(1, DVector::from_vec(vec![Complex64::new(h, 0.0), Complex64::new(0.0, h)])).unwrap();
        assert!((excited_fraction(&s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pair_kernel_matches_full_model() {
        for &(r1, r2, u, d) in &[(1.0, 0.8, 0.3, 0.2), (0.9, 1.1, -2.0, -0.5), (1.0, 1.0, 5.0, 0.1)] {
            let m = SpinModel::uniform(vec![r1, r2], u).unwrap();
            let h = SpinHamiltonian::from_model(&m, d, InteractionMode::MeanU).unwrap();
            for t in [0.3, 2.0, 7.0] {
                let full = excited_fraction(&evolve(&h, t).unwrap());
                let fast = pair_excitation([r1, r2], u, d, t);
                assert!((full - fast).abs() < 1e-12, "{full} vs {fast}");
            }
        }
    }

    #[test]
    fn capacity_guard() {
        assert!(matches!(SpinModel::uniform(vec![1.0; 13], 0.0), Err(Error::Capacity(_))));
    }

    #[test]
    fn rejects_nan() {
        assert!(SpinModel::uniform(vec![f64::NAN, 1.0], 0.0).is_err());
        let m = SpinModel::uniform(vec![1.0, 1.0], 0.0).unwrap();
        assert!(m.hamiltonian(f64::NAN).is_err());
        let h = SpinHamiltonian::from_model(&m, 0.0, InteractionMode::MeanU).unwrap();
        assert!(evolve(&h, f64::INFINITY).is_err());
    }

    #[test]
    fn total_spin_of_product_states() {
        // |gg⟩ has S = 1; (|eg⟩ − |ge⟩)/√2 has S = 0
        assert!((SpinState::all_ground(2).total_spin_squared() - 2.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let z = Complex64::new(0.0, 0.0);
        let singlet = SpinState::new(2, DVector::from_vec(vec![z, Complex64::new(h, 0.0), Complex64::new(-h, 0.0), z])).unwrap();
        assert!(singlet.total_spin_squared().abs() < 1e-14);
        assert!((SpinState::all_ground(5).total_spin_squared() - 2.5 * 3.5).abs() < 1e-12);
    }
}
