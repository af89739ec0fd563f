use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use trackhhl_core::resources::{loglog_slope, scaling_curve, ScalingRow, HL_LHC_PARTICLES};
use trackhhl_core::Error;

use crate::manifest::Outcome;
use crate::output_path;

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ScalingArgs {
    #[arg(long, default_value_t = 10)]
    pub np_min: u64,
    #[arg(long)]
    pub np_max: u64,
    /// Hits per particle.
    #[arg(long)]
    pub nhits: u64,
    /// Log-spaced grid points before the benchmark size is added.
    #[arg(long, default_value_t = 30)]
    pub points: usize,
    /// Probability that every segment is sampled at least once.
    #[arg(long, default_value_t = 0.99)]
    pub confidence: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Log-spaced integers in `[lo, hi]`, plus the benchmark size when it lies inside.
pub fn particle_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    let mut v: Vec<u64> = if points <= 1 || lo == hi {
        vec![lo, hi]
    } else {
        let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
        (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp().round() as u64).collect()
    };
    if (lo..=hi).contains(&HL_LHC_PARTICLES) {
        v.push(HL_LHC_PARTICLES);
    }
    v.sort_unstable();
    v.dedup();
    v
}

pub fn write_rows<W: Write>(rows: &[ScalingRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "n_particles,problem_size,samples_full,samples_one_bit,qubits_full,qubits_one_bit,hl_lhc")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.6e},{:.6e},{:.4},{:.4},{}",
            r.n_particles, r.problem_size, r.samples_full, r.samples_one_bit, r.qubits_full, r.qubits_one_bit, r.hl_lhc
        )?;
    }
    Ok(())
}

impl ScalingArgs {
    pub fn resolve(&mut self, dir: &Path) -> anyhow::Result<()> {
        self.output = Some(output_path(&self.output, dir, "scaling.csv")?);
        Ok(())
    }

    pub fn outputs_mut(&mut self) -> Vec<&mut PathBuf> {
        self.output.iter_mut().collect()
    }

    pub fn run(&self) -> anyhow::Result<Outcome> {
        if self.np_min == 0 || self.np_max < self.np_min || self.nhits == 0 {
            return Err(Error::Config("need 1 <= np-min <= np-max and nhits >= 1".into()).into());
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!("confidence {} outside (0, 1)", self.confidence)).into());
        }
        let mut out = Outcome::new(self, None)?;
        let grid = particle_grid(self.np_min, self.np_max, self.points);
        let rows = scaling_curve(&grid, self.nhits, self.confidence);
        if rows.len() >= 2 {
            let np: Vec<f64> = rows.iter().map(|r| r.n_particles as f64).collect();
            let full: Vec<f64> = rows.iter().map(|r| r.samples_full).collect();
            let one: Vec<f64> = rows.iter().map(|r| r.samples_one_bit).collect();
            eprintln!("log-log slope in N_p: full {:.3}, one-bit {:.3}", loglog_slope(&np, &full), loglog_slope(&np, &one));
        }
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf)?;
        out.add_bytes(self.output.as_ref().expect("resolved"), buf);
        Ok(out)
    }
}
