//! Qubit, sample and abstract gate accounting for full and 1-bit HHL.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::LinearSystem;
use crate::hhl::{Evolution, HhlConfig, Variant};
use crate::quantum::{pauli_decompose, system_qubits, PauliTerm};

/// Particles per event at the high-luminosity benchmark.
pub const HL_LHC_PARTICLES: u64 = 1500;
/// Largest system register handled by [`gate_report`].
pub const PAULI_QUBIT_LIMIT: usize = 10;

/// `2 log2 N + 2` (full) or `log2 N + 3` (one-bit).
pub fn qubit_formula(n: f64, variant: Variant) -> f64 {
    match variant {
        Variant::Full => 2.0 * n.log2() + 2.0,
        Variant::OneBit => n.log2() + 3.0,
    }
}

/// Qubits of the canonical register layout for a system of dimension `n`:
/// system, clock of `n_system + 1` bits and ancilla (full), or system, one
/// clock bit and ancilla (one-bit).
pub fn layout_qubits(n: usize, variant: Variant) -> usize {
    let s = system_qubits(n);
    match variant {
        Variant::Full => s + (s + 1) + 1,
        Variant::OneBit => s + 2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitCount {
    pub n: f64,
    pub variant: Variant,
    pub formula: f64,
    /// Padded dimension and layout size when `n` is a whole number.
    pub padded_n: Option<u64>,
    pub layout: Option<usize>,
}

pub fn qubit_count(n: f64, variant: Variant) -> QubitCount {
    let whole = n >= 1.0 && n.fract() == 0.0 && n <= (1u64 << 62) as f64;
    let padded_n = whole.then(|| (n as u64).next_power_of_two());
    QubitCount {
        n,
        variant,
        formula: qubit_formula(n, variant),
        padded_n,
        layout: padded_n.map(|p| layout_qubits(p as usize, variant)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSize {
    pub n_particles: u64,
    pub hits_per_particle: u64,
}

impl ProblemSize {
    /// `N_p^2 N_hits` candidate segments (full) or `N_p N_hits` active ones.
    pub fn n_segments(&self, variant: Variant) -> f64 {
        let (np, nh) = (self.n_particles as f64, self.hits_per_particle as f64);
        match variant {
            Variant::Full => np * np * nh,
            Variant::OneBit => np * nh,
        }
    }
}

/// `m ln m + m ln(1 / (1 - confidence))` with `m` the segment count.
pub fn expected_samples(size: ProblemSize, variant: Variant, confidence: f64) -> f64 {
    let m = size.n_segments(variant);
    m * m.ln() + m * (1.0 / (1.0 - confidence)).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_particles: u64,
    pub problem_size: f64,
    pub samples_full: f64,
    pub samples_one_bit: f64,
    pub qubits_full: f64,
    pub qubits_one_bit: f64,
    pub hl_lhc: bool,
}

pub fn scaling_curve(particles: &[u64], hits_per_particle: u64, confidence: f64) -> Vec<ScalingRow> {
    particles
        .iter()
        .map(|&np| {
            let size = ProblemSize { n_particles: np, hits_per_particle };
            let n = size.n_segments(Variant::Full);
            ScalingRow {
                n_particles: np,
                problem_size: n,
                samples_full: expected_samples(size, Variant::Full, confidence),
                samples_one_bit: expected_samples(size, Variant::OneBit, confidence),
                qubits_full: qubit_formula(n, Variant::Full),
                qubits_one_bit: qubit_formula(n, Variant::OneBit),
                hl_lhc: np == HL_LHC_PARTICLES,
            }
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCount {
    pub one_qubit: u64,
    pub two_qubit: u64,
}

impl GateCount {
    pub fn total(&self) -> u64 {
        self.one_qubit + self.two_qubit
    }

    fn add(&mut self, other: GateCount, times: u64) {
        self.one_qubit += other.one_qubit * times;
        self.two_qubit += other.two_qubit * times;
    }
}

/// Generic synthesis cost of an `m`-qubit unitary by quantum Shannon
/// decomposition.
pub fn shannon_decomposition_cost(m: usize) -> GateCount {
    let (p4, p2) = (4f64.powi(m as i32), 2f64.powi(m as i32));
    let two = (23.0 / 48.0 * p4 - 1.5 * p2 + 4.0 / 3.0).ceil().max(0.0) as u64;
    GateCount { one_qubit: 2 * two + m as u64, two_qubit: two }
}

/// Controlled `exp(i c P dt)`: a CNOT ladder over the support plus the
/// control, basis changes around `X`/`Y` factors and one rotation.
pub fn controlled_pauli_rotation_cost(term: &PauliTerm) -> GateCount {
    if term.is_identity() {
        return GateCount { one_qubit: 1, two_qubit: 0 };
    }
    let w = term.weight() as u64;
    GateCount { one_qubit: 2 * term.n_xy() as u64 + 2, two_qubit: 2 * (w - 1) + 2 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub variant: Variant,
    pub n_system: usize,
    pub n_clock: usize,
    /// Nonzero Pauli strings of `A`.
    pub pauli_terms: usize,
    pub controlled_evolution_applications: u64,
    pub per_application: GateCount,
    pub gates: GateCount,
    pub two_qubit_abstract_gates: u64,
    pub total_abstract_gates: u64,
}

fn fourier_cost(c: u64) -> GateCount {
    let phases = c * c.saturating_sub(1) / 2;
    GateCount { one_qubit: 3 * phases + c, two_qubit: 2 * phases + 3 * (c / 2) }
}

pub fn gate_report(system: &LinearSystem, cfg: &HhlConfig) -> Result<GateReport> {
    cfg.validate()?;
    let n_system = system_qubits(system.n);
    if n_system > PAULI_QUBIT_LIMIT {
        return Err(Error::Budget { required: n_system, limit: PAULI_QUBIT_LIMIT });
    }
    let (a, _) = system.padded(1 << n_system);
    let terms = pauli_decompose(&a, 1e-12)?;
    let c = cfg.n_clock as u64;

    let per_application = match cfg.evolution {
        Evolution::Exact => shannon_decomposition_cost(n_system + 1),
        Evolution::Trotter { steps, .. } => {
            let mut g = GateCount::default();
            for t in &terms {
                // the one-bit generator drops the identity component
                if cfg.variant == Variant::OneBit && t.is_identity() {
                    continue;
                }
                g.add(controlled_pauli_rotation_cost(t), 1);
            }
            let mut per = GateCount::default();
            per.add(g, steps as u64);
            per
        }
    };
    let applications = 2 * ((1u64 << c) - 1);

    let mut gates = GateCount { one_qubit: n_system as u64 + 2 * c, two_qubit: 0 };
    gates.add(per_application, applications);
    gates.add(fourier_cost(c), 2);
    gates.add(
        match cfg.variant {
            Variant::Full => GateCount { one_qubit: 1 << c, two_qubit: 1 << c },
            Variant::OneBit => GateCount { one_qubit: 2, two_qubit: 2 },
        },
        1,
    );
    Ok(GateReport {
        variant: cfg.variant,
        n_system,
        n_clock: cfg.n_clock,
        pauli_terms: terms.len(),
        controlled_evolution_applications: applications,
        per_application,
        gates,
        two_qubit_abstract_gates: gates.two_qubit,
        total_abstract_gates: gates.total(),
    })
}
