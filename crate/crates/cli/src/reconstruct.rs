use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use trackhhl_core::classical::DEFAULT_THRESHOLD;
use trackhhl_core::hhl::{Evolution, DEFAULT_QUBIT_BUDGET};
use trackhhl_core::quantum::TrotterSplit;
use trackhhl_core::{reconstruct, ClassifyRule, HamiltonianParams, Method, ReconstructConfig, SolveMethod};

use crate::manifest::Outcome;
use crate::{absolute, output_path, read_event};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Classical,
    Hhl,
    #[value(name = "hhl1bit")]
    Hhl1bit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    Direct,
    Cg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvolutionArg {
    Exact,
    Trotter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitArg {
    DiagOffdiag,
    Pauli,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub event: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "direct")]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    /// Activation threshold on the classical solution.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Angular tolerance on cos(theta).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Drop candidate segments steeper than this in x or y.
    #[arg(long)]
    pub max_slope: Option<f64>,
    /// Clock qubits of the full variant.
    #[arg(long, default_value_t = 5)]
    pub clock: usize,
    /// Defaults to exact for hhl and trotter for hhl1bit.
    #[arg(long, value_enum)]
    pub evolution: Option<EvolutionArg>,
    #[arg(long, default_value_t = 1)]
    pub trotter_steps: usize,
    #[arg(long, value_enum, default_value = "diag-offdiag")]
    pub split: SplitArg,
    /// Evolution time; chosen from the spectrum bound when absent.
    #[arg(long)]
    pub time: Option<f64>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_QUBIT_BUDGET)]
    pub qubit_budget: usize,
    /// Classify quantum output with a fixed probability threshold instead of the largest gap.
    #[arg(long)]
    pub classify_threshold: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Matrix A in coordinate format.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Dense A as CSV.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    /// Per-segment quantum probabilities as CSV.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
}

impl ReconstructArgs {
    pub fn resolve(&mut self, dir: &Path) -> anyhow::Result<()> {
        self.event = absolute(&self.event)?;
        self.output = Some(output_path(&self.output, dir, "result.json")?);
        for p in [&mut self.matrix, &mut self.heatmap, &mut self.spectrum].into_iter().flatten() {
            *p = absolute(p)?;
        }
        Ok(())
    }

    pub fn outputs_mut(&mut self) -> Vec<&mut PathBuf> {
        [&mut self.output, &mut self.matrix, &mut self.heatmap, &mut self.spectrum].into_iter().flatten().collect()
    }

    pub fn config(&self) -> ReconstructConfig {
        let method = match self.method {
            MethodArg::Classical => Method::Classical,
            MethodArg::Hhl => Method::Hhl,
            MethodArg::Hhl1bit => Method::Hhl1bit,
        };
        let mut cfg = ReconstructConfig::new(method);
        let defaults = HamiltonianParams::default();
        cfg.params = HamiltonianParams {
            epsilon: self.epsilon.unwrap_or(defaults.epsilon),
            alpha: self.alpha.unwrap_or(defaults.alpha),
            beta: self.beta.unwrap_or(defaults.beta),
        };
        cfg.max_slope = self.max_slope;
        cfg.solver = match self.solver {
            SolverArg::Direct => SolveMethod::Direct,
            SolverArg::Cg => SolveMethod::ConjugateGradient,
        };
        cfg.tolerance = self.tolerance;
        cfg.threshold = self.threshold;
        if method == Method::Hhl {
            cfg.hhl.n_clock = self.clock;
        }
        let split = match self.split {
            SplitArg::DiagOffdiag => TrotterSplit::DiagOffdiag,
            SplitArg::Pauli => TrotterSplit::PauliTerms,
        };
        cfg.hhl.evolution = match (self.evolution, method) {
            (Some(EvolutionArg::Exact), _) | (None, Method::Hhl) => Evolution::Exact,
            _ => Evolution::Trotter { steps: self.trotter_steps, split },
        };
        cfg.hhl.evolution_time = self.time;
        cfg.hhl.shots = self.shots;
        cfg.hhl.seed = self.seed;
        cfg.hhl.qubit_budget = self.qubit_budget;
        if let Some(value) = self.classify_threshold {
            cfg.classify = ClassifyRule::Threshold { value };
        }
        cfg
    }

    pub fn run(&self) -> anyhow::Result<Outcome> {
        let cfg = self.config();
        let mut out = Outcome::new(cfg, (self.method != MethodArg::Classical).then_some(self.seed))?;
        out.inputs.push(self.event.clone());
        let event = read_event(&self.event)?;
        let rec = out.timings.time("reconstruct", || reconstruct(&event, &cfg))?;
        out.warnings.extend(rec.result.warnings.iter().cloned());

        out.add_json(self.output.as_ref().expect("resolved"), &rec.result)?;
        if let Some(path) = &self.matrix {
            let mut buf = Vec::new();
            if let Some(sys) = &rec.system {
                sys.write_coordinate(&mut buf)?;
            }
            out.add_bytes(path, buf);
        }
        if let Some(path) = &self.heatmap {
            let mut buf = Vec::new();
            if let Some(sys) = &rec.system {
                sys.write_heatmap_csv(&mut buf)?;
            }
            out.add_bytes(path, buf);
        }
        if let Some(path) = &self.spectrum {
            match &rec.result.quantum {
                Some(q) => {
                    let mut buf = Vec::new();
                    q.write_spectrum_csv(&mut buf)?;
                    out.add_bytes(path, buf);
                }
                None => out.warnings.push("no quantum run; spectrum file not written".into()),
            }
        }
        Ok(out)
    }
}
