use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use trackhhl_core::hamiltonian::{build_system, enumerate_segments};
use trackhhl_core::hhl::Evolution;
use trackhhl_core::resources::{gate_report, qubit_count, GateReport, QubitCount};
use trackhhl_core::{HamiltonianParams, HhlConfig, Variant};

use crate::manifest::Outcome;
use crate::reconstruct::EvolutionArg;
use crate::{absolute, output_path, read_event};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Full,
    OneBit,
    Both,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ResourcesArgs {
    #[arg(long)]
    pub event: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub variant: VariantArg,
    /// Clock qubits of the full variant.
    #[arg(long, default_value_t = 6)]
    pub clock: usize,
    /// Evolution of the full variant.
    #[arg(long, value_enum, default_value = "exact")]
    pub evolution: EvolutionArg,
    #[arg(long, default_value_t = 1)]
    pub trotter_steps: usize,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_slope: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct ResourceReport {
    n_segments: usize,
    qubits: Vec<QubitCount>,
    reports: Vec<GateReport>,
    /// Full over one-bit, when both were computed.
    total_gate_ratio: Option<f64>,
    two_qubit_gate_ratio: Option<f64>,
}

impl ResourcesArgs {
    pub fn resolve(&mut self, dir: &Path) -> anyhow::Result<()> {
        self.event = absolute(&self.event)?;
        self.output = Some(output_path(&self.output, dir, "resources.json")?);
        Ok(())
    }

    pub fn outputs_mut(&mut self) -> Vec<&mut PathBuf> {
        self.output.iter_mut().collect()
    }

    fn configs(&self) -> Vec<HhlConfig> {
        let mut full = HhlConfig::full(self.clock);
        if self.evolution == EvolutionArg::Trotter {
            full.evolution = Evolution::Trotter { steps: self.trotter_steps, split: trackhhl_core::quantum::TrotterSplit::PauliTerms };
        }
        let mut one = HhlConfig::one_bit();
        one.evolution = Evolution::Trotter { steps: self.trotter_steps, split: trackhhl_core::quantum::TrotterSplit::DiagOffdiag };
        match self.variant {
            VariantArg::Full => vec![full],
            VariantArg::OneBit => vec![one],
            VariantArg::Both => vec![full, one],
        }
    }

    pub fn run(&self) -> anyhow::Result<Outcome> {
        let configs = self.configs();
        let mut out = Outcome::new(&configs, None)?;
        out.inputs.push(self.event.clone());
        let event = read_event(&self.event)?;
        let params = HamiltonianParams { epsilon: self.epsilon.unwrap_or(HamiltonianParams::default().epsilon), ..Default::default() };
        let segments = enumerate_segments(&event, self.max_slope);
        if segments.is_empty() {
            return Err(trackhhl_core::Error::Config("event has no candidate segments".into()).into());
        }
        let system = build_system(&segments, &params)?;
        let reports = out.timings.time("gate_report", || configs.iter().map(|c| gate_report(&system, c)).collect::<trackhhl_core::Result<Vec<_>>>())?;
        let qubits = configs.iter().map(|c| qubit_count(system.n as f64, c.variant)).collect();
        let find = |v: Variant| reports.iter().find(|r| r.variant == v);
        let (total_gate_ratio, two_qubit_gate_ratio) = match (find(Variant::Full), find(Variant::OneBit)) {
            (Some(f), Some(o)) => (
                Some(f.total_abstract_gates as f64 / o.total_abstract_gates as f64),
                Some(f.two_qubit_abstract_gates as f64 / o.two_qubit_abstract_gates.max(1) as f64),
            ),
            _ => (None, None),
        };
        if let Some(r) = total_gate_ratio {
            eprintln!("full / one-bit abstract gates: {r:.1}");
        }
        let report = ResourceReport { n_segments: system.n, qubits, reports, total_gate_ratio, two_qubit_gate_ratio };
        out.add_json(self.output.as_ref().expect("resolved"), &report)?;
        Ok(out)
    }
}
