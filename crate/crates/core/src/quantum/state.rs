use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::evolution::EvolutionOperator;
use crate::error::{Error, Result};

/// Smallest post-selection probability that is still sampled.
pub const MIN_POSTSELECT: f64 = 1e-12;

/// Qubits needed to index `n` basis states (at least one state).
pub fn system_qubits(n: usize) -> usize {
    n.max(1).next_power_of_two().trailing_zeros() as usize
}

/// Qubit ordering, least significant first: system, clock, ancilla.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    pub n_system: usize,
    pub n_clock: usize,
    pub n_ancilla: usize,
}

impl RegisterLayout {
    pub fn new(n_system: usize, n_clock: usize) -> Self {
        RegisterLayout { n_system, n_clock, n_ancilla: 1 }
    }

    pub fn for_dimension(n: usize, n_clock: usize) -> Self {
        Self::new(system_qubits(n), n_clock)
    }

    pub fn total_qubits(&self) -> usize {
        self.n_system + self.n_clock + self.n_ancilla
    }

    pub fn dim(&self) -> usize {
        1 << self.total_qubits()
    }

    pub fn system_dim(&self) -> usize {
        1 << self.n_system
    }

    pub fn clock_dim(&self) -> usize {
        1 << self.n_clock
    }

    pub fn clock_qubit(&self, k: usize) -> usize {
        self.n_system + k
    }

    pub fn ancilla_qubit(&self) -> usize {
        self.n_system + self.n_clock
    }

    pub fn index(&self, system: usize, clock: usize, ancilla: usize) -> usize {
        system | (clock << self.n_system) | (ancilla << self.ancilla_qubit())
    }

    /// `(system, clock, ancilla)` of a basis index.
    pub fn split(&self, idx: usize) -> (usize, usize, usize) {
        (
            idx & (self.system_dim() - 1),
            (idx >> self.n_system) & (self.clock_dim() - 1),
            idx >> self.ancilla_qubit(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum RotationMode {
    /// Ancilla amplitude `C / lambda(l)` with `lambda(l) = 2 pi l / (2^c t)`.
    MultiBit { constant: f64, time: f64 },
    /// Full flip of the ancilla when the single clock qubit reads 1.
    OneBit,
}

/// Which outcomes are kept at readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    AncillaOne,
    AncillaOneClockZero,
}

impl Readout {
    fn keeps(&self, clock: usize, ancilla: usize) -> bool {
        ancilla == 1 && (clock == 0 || *self == Readout::AncillaOne)
    }
}

/// System-register amplitudes conditioned on a readout.
#[derive(Clone, Debug, PartialEq)]
pub struct Postselected {
    /// Normalised; all zero when `rate == 0`.
    pub amplitudes: Vec<Complex64>,
    pub rate: f64,
}

impl Postselected {
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    layout: RegisterLayout,
}

impl StateVector {
    pub fn zero(layout: RegisterLayout) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.dim()];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        StateVector { amplitudes, layout }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>, layout: RegisterLayout) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::Contract(format!("{} amplitudes for a {}-dimensional layout", amplitudes.len(), layout.dim())));
        }
        Ok(StateVector { amplitudes, layout })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn layout(&self) -> RegisterLayout {
        self.layout
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies `[[m00, m01], [m10, m11]]` to one qubit.
    pub fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let bit = 1 << qubit;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amplitudes[i], self.amplitudes[i | bit]);
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    pub fn hadamard(&mut self, qubit: usize) {
        let h = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        self.apply_single(qubit, [[h, h], [h, -h]]);
    }

    pub fn ry(&mut self, qubit: usize, theta: f64) {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        self.apply_single(qubit, [[c.into(), (-s).into()], [s.into(), c.into()]]);
    }

    /// Applies `u` to the system register on every branch where `control` is set.
    pub fn apply_controlled_system(&mut self, control: usize, u: &DMatrix<Complex64>) {
        let sd = self.layout.system_dim();
        assert_eq!(u.nrows(), sd);
        for (b, block) in self.amplitudes.chunks_mut(sd).enumerate() {
            if (b * sd) >> control & 1 == 1 {
                let v = u * DVector::from_column_slice(block);
                block.copy_from_slice(v.as_slice());
            }
        }
    }

    /// Fourier transform of the clock register; `inverse` uses `exp(-2 pi i y l / M)`.
    pub fn clock_fourier(&mut self, inverse: bool) {
        let m = self.layout.clock_dim();
        if m == 1 {
            return;
        }
        let sign = if inverse { -1.0 } else { 1.0 };
        let scale = 1.0 / (m as f64).sqrt();
        let kernel: Vec<Complex64> = (0..m).map(|k| Complex64::from_polar(scale, sign * 2.0 * PI * k as f64 / m as f64)).collect();
        let layout = self.layout;
        let old = self.amplitudes.clone();
        for anc in 0..2 {
            for s in 0..layout.system_dim() {
                for l in 0..m {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for y in 0..m {
                        acc += kernel[(y * l) % m] * old[layout.index(s, y, anc)];
                    }
                    self.amplitudes[layout.index(s, l, anc)] = acc;
                }
            }
        }
    }

    fn clock_population(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| self.layout.split(*i).1 != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    fn check_system_dim(&self, u: &EvolutionOperator) -> Result<()> {
        if u.dim() != self.layout.system_dim() {
            return Err(Error::Contract(format!("{}-dimensional unitary on a {}-dimensional register", u.dim(), self.layout.system_dim())));
        }
        Ok(())
    }

    /// Hadamards on the clock, controlled `U^(2^k)` from clock qubit `k`,
    /// then the inverse Fourier transform of the clock.
    pub fn qpe(&mut self, u: &EvolutionOperator) -> Result<()> {
        self.check_system_dim(u)?;
        if self.clock_population() > 1e-12 {
            return Err(Error::Contract("clock register is not cleared".into()));
        }
        let c = self.layout.n_clock;
        for k in 0..c {
            self.hadamard(self.layout.clock_qubit(k));
        }
        let mut power = u.matrix.clone();
        for k in 0..c {
            self.apply_controlled_system(self.layout.clock_qubit(k), &power);
            if k + 1 < c {
                power = &power * &power;
            }
        }
        self.clock_fourier(true);
        Ok(())
    }

    /// Exact adjoint of [`StateVector::qpe`].
    pub fn inverse_qpe(&mut self, u: &EvolutionOperator) -> Result<()> {
        self.check_system_dim(u)?;
        let c = self.layout.n_clock;
        self.clock_fourier(false);
        let mut powers = vec![u.matrix.adjoint()];
        for k in 1..c {
            powers.push(&powers[k - 1] * &powers[k - 1]);
        }
        for k in (0..c).rev() {
            self.apply_controlled_system(self.layout.clock_qubit(k), &powers[k]);
        }
        for k in 0..c {
            self.hadamard(self.layout.clock_qubit(k));
        }
        Ok(())
    }

    pub fn controlled_inversion_rotation(&mut self, mode: RotationMode) -> Result<()> {
        let layout = self.layout;
        let anc = layout.ancilla_qubit();
        let angles: Vec<f64> = match mode {
            RotationMode::MultiBit { constant, time } => {
                let m = layout.clock_dim() as f64;
                let lambda = |l: usize| 2.0 * PI * l as f64 / (m * time);
                if layout.clock_dim() < 2 || !(time > 0.0) {
                    return Err(Error::Contract("multi-bit rotation needs a clock register and t > 0".into()));
                }
                if !(constant > 0.0) || constant > lambda(1) * (1.0 + 1e-12) {
                    return Err(Error::Contract(format!(
                        "rotation constant {constant} outside (0, {}]",
                        lambda(1)
                    )));
                }
                (0..layout.clock_dim())
                    .map(|l| if l == 0 { 0.0 } else { 2.0 * (constant / lambda(l)).min(1.0).asin() })
                    .collect()
            }
            RotationMode::OneBit => {
                if layout.n_clock != 1 {
                    return Err(Error::Contract("one-bit rotation needs exactly one clock qubit".into()));
                }
                vec![0.0, PI]
            }
        };
        let bit = 1 << anc;
        for i in 0..self.amplitudes.len() {
            if i & bit != 0 {
                continue;
            }
            let theta = angles[layout.split(i).1];
            if theta == 0.0 {
                continue;
            }
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            let (a0, a1) = (self.amplitudes[i], self.amplitudes[i | bit]);
            self.amplitudes[i] = a0 * c - a1 * s;
            self.amplitudes[i | bit] = a0 * s + a1 * c;
        }
        Ok(())
    }

    pub fn postselect(&self, readout: Readout) -> Postselected {
        let layout = self.layout;
        let mut amps = vec![Complex64::new(0.0, 0.0); layout.system_dim()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let (s, c, anc) = layout.split(i);
            if readout.keeps(c, anc) {
                // with the clock-zero readout each system index is hit once
                amps[s] += a;
            }
        }
        let rate = if readout == Readout::AncillaOneClockZero {
            amps.iter().map(|a| a.norm_sqr()).sum::<f64>()
        } else {
            self.amplitudes
                .iter()
                .enumerate()
                .filter(|(i, _)| layout.split(*i).2 == 1)
                .map(|(_, a)| a.norm_sqr())
                .sum()
        };
        if readout == Readout::AncillaOne {
            // marginal over the clock, kept as magnitudes
            let mut probs = vec![0.0; layout.system_dim()];
            for (i, a) in self.amplitudes.iter().enumerate() {
                let (s, _, anc) = layout.split(i);
                if anc == 1 {
                    probs[s] += a.norm_sqr();
                }
            }
            let amplitudes = probs
                .iter()
                .map(|p| Complex64::from(if rate > 0.0 { (p / rate).sqrt() } else { 0.0 }))
                .collect();
            return Postselected { amplitudes, rate };
        }
        let scale = if rate > 0.0 { 1.0 / rate.sqrt() } else { 0.0 };
        Postselected { amplitudes: amps.into_iter().map(|a| a * scale).collect(), rate }
    }

    /// Exact post-selected probabilities over the system register.
    pub fn probabilities(&self, readout: Readout) -> (Vec<f64>, f64) {
        let p = self.postselect(readout);
        (p.probabilities(), p.rate)
    }

    /// Draws `shots` post-selected system outcomes.
    pub fn sample(&self, readout: Readout, shots: u64, seed: u64) -> Result<BTreeMap<usize, u64>> {
        if shots == 0 {
            return Err(Error::Config("shots must be >= 1".into()));
        }
        let (probs, rate) = self.probabilities(readout);
        if rate < MIN_POSTSELECT {
            return Err(Error::PostSelection { probability: rate });
        }
        sample_distribution(&probs, shots, seed)
    }

    /// Raw little-endian `(re, im)` pairs of `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for a in &self.amplitudes {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }
}

pub fn sample_distribution(probs: &[f64], shots: u64, seed: u64) -> Result<BTreeMap<usize, u64>> {
    let dist = WeightedIndex::new(probs).map_err(|e| Error::Contract(format!("cannot sample: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        *counts.entry(dist.sample(&mut rng)).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Normalised state for `b`, zero-padded to the system register.
pub fn prepare_b_state(b: &[f64], layout: RegisterLayout) -> Result<StateVector> {
    if b.len() > layout.system_dim() {
        return Err(Error::Contract(format!("vector of length {} exceeds register of {}", b.len(), layout.system_dim())));
    }
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Contract("cannot encode a zero vector".into()));
    }
    let uniform = b.len() == layout.system_dim() && b.iter().all(|&v| v == b[0]);
    if uniform && b[0] > 0.0 {
        let mut st = StateVector::zero(layout);
        for q in 0..layout.n_system {
            st.hadamard(q);
        }
        return Ok(st);
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.dim()];
    for (i, v) in b.iter().enumerate() {
        amplitudes[i] = Complex64::from(v / norm);
    }
    Ok(StateVector { amplitudes, layout })
}
