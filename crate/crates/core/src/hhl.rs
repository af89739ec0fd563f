//! End-to-end HHL and 1-bit HHL on a [`LinearSystem`], plus read-out
//! classification of the post-selected spectrum.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classical::{solve, ActiveSet, SolveMethod};
use crate::error::{Error, Result};
use crate::hamiltonian::LinearSystem;
use crate::quantum::state::{sample_distribution, MIN_POSTSELECT};
use crate::quantum::{
    exact_evolution, gershgorin_upper, prepare_b_state, system_qubits, trotter_evolution, EvolutionOperator,
    Readout, RegisterLayout, RotationMode, TrotterSplit,
};

pub const DEFAULT_QUBIT_BUDGET: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    OneBit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Evolution {
    Exact,
    Trotter { steps: usize, split: TrotterSplit },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HhlConfig {
    pub variant: Variant,
    pub n_clock: usize,
    pub evolution: Evolution,
    /// `None` picks `t` so every eigenphase fits the clock.
    pub evolution_time: Option<f64>,
    /// `None` uses the smallest representable eigenvalue.
    pub rotation_constant: Option<f64>,
    /// `None` reports exact probabilities only.
    pub shots: Option<u64>,
    pub seed: u64,
    pub qubit_budget: usize,
}

impl HhlConfig {
    pub fn full(n_clock: usize) -> Self {
        HhlConfig {
            variant: Variant::Full,
            n_clock,
            evolution: Evolution::Exact,
            evolution_time: None,
            rotation_constant: None,
            shots: None,
            seed: 0,
            qubit_budget: DEFAULT_QUBIT_BUDGET,
        }
    }

    pub fn one_bit() -> Self {
        HhlConfig {
            variant: Variant::OneBit,
            n_clock: 1,
            evolution: Evolution::Trotter { steps: 1, split: TrotterSplit::DiagOffdiag },
            ..Self::full(1)
        }
    }

    pub fn with_shots(mut self, shots: u64, seed: u64) -> Self {
        self.shots = Some(shots);
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clock == 0 {
            return Err(Error::Config("n_clock must be >= 1".into()));
        }
        if self.variant == Variant::OneBit && self.n_clock != 1 {
            return Err(Error::Config("the one-bit variant uses exactly one clock qubit".into()));
        }
        if let Evolution::Trotter { steps: 0, .. } = self.evolution {
            return Err(Error::Config("trotter steps must be >= 1".into()));
        }
        if let Some(t) = self.evolution_time {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("evolution time must be positive, got {t}")));
            }
        }
        if self.shots == Some(0) {
            return Err(Error::Config("shots must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumResult {
    pub variant: Variant,
    pub layout: RegisterLayout,
    /// Exact post-selected probability of each segment.
    pub probabilities: Vec<f64>,
    /// Exact post-selected probability on padding states.
    pub padded_mass: f64,
    pub shots: Option<u64>,
    pub samples: Option<BTreeMap<usize, u64>>,
    pub postselect_rate: f64,
    pub fidelity_vs_classical: Option<f64>,
    pub evolution_time: f64,
    pub rotation_constant: Option<f64>,
    /// Nothing survived post-selection; `probabilities` is flat.
    pub degenerate: bool,
}

impl QuantumResult {
    /// Per-segment frequencies in shots mode, exact probabilities otherwise.
    pub fn spectrum(&self) -> Vec<f64> {
        match (&self.samples, self.shots) {
            (Some(counts), Some(shots)) => (0..self.probabilities.len())
                .map(|i| *counts.get(&i).unwrap_or(&0) as f64 / shots as f64)
                .collect(),
            _ => self.probabilities.clone(),
        }
    }

    /// `segment,probability[,frequency]` rows.
    pub fn write_spectrum_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let freq = self.samples.as_ref().map(|_| self.spectrum());
        match &freq {
            Some(_) => writeln!(w, "segment,probability,frequency")?,
            None => writeln!(w, "segment,probability")?,
        }
        for (i, p) in self.probabilities.iter().enumerate() {
            match &freq {
                Some(f) => writeln!(w, "{i},{p:.12e},{:.12e}", f[i])?,
                None => writeln!(w, "{i},{p:.12e}")?,
            }
        }
        Ok(())
    }
}

fn check_budget(layout: &RegisterLayout, budget: usize) -> Result<()> {
    if layout.total_qubits() > budget {
        return Err(Error::Budget { required: layout.total_qubits(), limit: budget });
    }
    Ok(())
}

fn evolve(a: &DMatrix<f64>, t: f64, evolution: Evolution) -> Result<EvolutionOperator> {
    match evolution {
        Evolution::Exact => exact_evolution(a, t),
        Evolution::Trotter { steps, split } => trotter_evolution(a, t, steps, split),
    }
}

fn classical_reference(system: &LinearSystem) -> Result<Vec<f64>> {
    let method = if system.n <= crate::classical::DENSE_LIMIT { SolveMethod::Direct } else { SolveMethod::ConjugateGradient };
    Ok(solve(system, method, 1e-10)?.values)
}

struct Readouts {
    probabilities: Vec<f64>,
    padded_mass: f64,
    rate: f64,
    samples: Option<BTreeMap<usize, u64>>,
}

fn read_out(system: &LinearSystem, probs: Vec<f64>, rate: f64, cfg: &HhlConfig) -> Result<Readouts> {
    let samples = match cfg.shots {
        Some(shots) if rate >= MIN_POSTSELECT => Some(sample_distribution(&probs, shots, cfg.seed)?),
        Some(_) => return Err(Error::PostSelection { probability: rate }),
        None => None,
    };
    let padded_mass = probs[system.n..].iter().sum();
    let mut probabilities = probs;
    probabilities.truncate(system.n);
    Ok(Readouts { probabilities, padded_mass, rate, samples })
}

/// Full HHL with a `n_clock`-bit eigenvalue register and `1/lambda`
/// ancilla rotation.
pub fn run_hhl(system: &LinearSystem, cfg: &HhlConfig) -> Result<QuantumResult> {
    cfg.validate()?;
    if cfg.variant != Variant::Full {
        return Err(Error::Config("run_hhl expects the full variant".into()));
    }
    let layout = RegisterLayout::new(system_qubits(system.n), cfg.n_clock);
    check_budget(&layout, cfg.qubit_budget)?;
    let classical = classical_reference(system)?;

    let (a, b) = system.padded(layout.system_dim());
    let clock_dim = layout.clock_dim() as f64;
    let t = cfg.evolution_time.unwrap_or(2.0 * PI * (1.0 - 1.0 / clock_dim) / gershgorin_upper(&a));
    let constant = cfg.rotation_constant.unwrap_or(2.0 * PI / (clock_dim * t));
    let u = evolve(&a, t, cfg.evolution)?;

    let mut state = prepare_b_state(&b, layout)?;
    state.qpe(&u)?;
    state.controlled_inversion_rotation(RotationMode::MultiBit { constant, time: t })?;
    state.inverse_qpe(&u)?;
    let post = state.postselect(Readout::AncillaOneClockZero);
    if post.rate < MIN_POSTSELECT {
        return Err(Error::PostSelection { probability: post.rate });
    }

    let x_norm = classical.iter().map(|v| v * v).sum::<f64>().sqrt();
    let overlap: num_complex::Complex64 = classical.iter().zip(&post.amplitudes).map(|(x, q)| q.conj() * (x / x_norm)).sum();
    let out = read_out(system, post.probabilities(), post.rate, cfg)?;
    Ok(QuantumResult {
        variant: Variant::Full,
        layout,
        probabilities: out.probabilities,
        padded_mass: out.padded_mass,
        shots: cfg.shots,
        samples: out.samples,
        postselect_rate: out.rate,
        fidelity_vs_classical: Some(overlap.norm_sqr()),
        evolution_time: t,
        rotation_constant: Some(constant),
        degenerate: false,
    })
}

/// 1-bit HHL: one clock qubit, coarse evolution under the interaction part
/// of `A`, and a full ancilla flip when the clock reads 1.
pub fn run_hhl_1bit(system: &LinearSystem, cfg: &HhlConfig) -> Result<QuantumResult> {
    cfg.validate()?;
    if cfg.variant != Variant::OneBit {
        return Err(Error::Config("run_hhl_1bit expects the one-bit variant".into()));
    }
    let layout = RegisterLayout::new(system_qubits(system.n), 1);
    check_budget(&layout, cfg.qubit_budget)?;
    classical_reference(system)?;

    let (a, b) = system.padded(layout.system_dim());
    let shift = a.trace() / a.nrows() as f64;
    let g = &a - DMatrix::<f64>::identity(a.nrows(), a.nrows()) * shift;
    let bound = gershgorin_upper(&g);
    let t = cfg.evolution_time.unwrap_or(if bound > 0.0 { PI / bound } else { 1.0 });
    let u = evolve(&g, t, cfg.evolution)?;

    let mut state = prepare_b_state(&b, layout)?;
    state.qpe(&u)?;
    state.controlled_inversion_rotation(RotationMode::OneBit)?;
    state.inverse_qpe(&u)?;
    let post = state.postselect(Readout::AncillaOneClockZero);

    let degenerate = post.rate < MIN_POSTSELECT;
    let (probabilities, padded_mass, samples) = if degenerate {
        if cfg.shots.is_some() {
            return Err(Error::PostSelection { probability: post.rate });
        }
        (vec![1.0 / system.n as f64; system.n], 0.0, None)
    } else {
        let out = read_out(system, post.probabilities(), post.rate, cfg)?;
        (out.probabilities, out.padded_mass, out.samples)
    };
    Ok(QuantumResult {
        variant: Variant::OneBit,
        layout,
        probabilities,
        padded_mass,
        shots: cfg.shots,
        samples,
        postselect_rate: post.rate,
        fidelity_vs_classical: None,
        evolution_time: t,
        rotation_constant: None,
        degenerate,
    })
}

pub fn run(system: &LinearSystem, cfg: &HhlConfig) -> Result<QuantumResult> {
    match cfg.variant {
        Variant::Full => run_hhl(system, cfg),
        Variant::OneBit => run_hhl_1bit(system, cfg),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum ClassifyRule {
    LargestGap,
    Threshold { value: f64 },
}

/// Floor applied before taking logarithms of probabilities.
pub const PROBABILITY_FLOOR: f64 = 1e-15;

/// Number of leading entries (in descending order) above the largest
/// log-probability gap, or `None` when the gaps show no clear split.
pub fn largest_gap_split(sorted_desc: &[f64]) -> Option<usize> {
    if sorted_desc.len() < 2 {
        return None;
    }
    let logs: Vec<f64> = sorted_desc.iter().map(|p| p.max(PROBABILITY_FLOOR).ln()).collect();
    let gaps: Vec<f64> = logs.windows(2).map(|w| w[0] - w[1]).collect();
    let (mut at, mut best) = (0, gaps[0]);
    for (i, &g) in gaps.iter().enumerate() {
        if g > best {
            at = i;
            best = g;
        }
    }
    let mut sorted_gaps = gaps.clone();
    sorted_gaps.sort_by(f64::total_cmp);
    let mid = sorted_gaps.len() / 2;
    let median = if sorted_gaps.len() % 2 == 1 { sorted_gaps[mid] } else { 0.5 * (sorted_gaps[mid - 1] + sorted_gaps[mid]) };
    if best <= 0.0 || best < 10.0 * median {
        return None;
    }
    Some(at + 1)
}

pub fn classify(result: &QuantumResult, rule: ClassifyRule) -> ActiveSet {
    classify_spectrum(&result.spectrum(), rule)
}

pub fn classify_spectrum(spectrum: &[f64], rule: ClassifyRule) -> ActiveSet {
    match rule {
        ClassifyRule::Threshold { value } => crate::classical::discretize(spectrum, value),
        ClassifyRule::LargestGap => {
            let mut order: Vec<usize> = (0..spectrum.len()).collect();
            order.sort_by(|&i, &j| spectrum[j].total_cmp(&spectrum[i]).then(i.cmp(&j)));
            let sorted: Vec<f64> = order.iter().map(|&i| spectrum[i]).collect();
            match largest_gap_split(&sorted) {
                Some(k) => ActiveSet { active: order[..k].iter().copied().collect(), threshold_used: sorted[k - 1] },
                None => ActiveSet { active: Default::default(), threshold_used: f64::MAX },
            }
        }
    }
}

/// Smallest `m` with `sum_i (1 - p_i)^m <= 1 - confidence`: by the union
/// bound, `m` shots see every outcome at least once with probability at
/// least `confidence`. `None` if some `p_i` is zero.
pub fn required_shots(probabilities: &[f64], confidence: f64) -> Option<u64> {
    if probabilities.is_empty() {
        return Some(0);
    }
    if probabilities.iter().any(|&p| !(p > 0.0)) {
        return None;
    }
    let delta = 1.0 - confidence;
    let miss = |m: u64| probabilities.iter().map(|&p| (1.0 - p.min(1.0)).powf(m as f64)).sum::<f64>();
    let mut hi = 1u64;
    while miss(hi) > delta {
        hi = hi.checked_mul(2)?;
    }
    let mut lo = 0u64;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if miss(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}
