use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trackhhl_core::pipeline::{segment_projections, track_projections};
use trackhhl_core::pv::{
    cluster_z, discard_point, pv_difference, BeamlineProjection, MadCurve, PvDifference, SweepParams, VertexEstimate,
    VertexSource, DEFAULT_EPS, DEFAULT_MIN_SAMPLES,
};
use trackhhl_core::ReconstructionResult;

use crate::manifest::Outcome;
use crate::{absolute, output_path, read_event, read_json};

/// Inclusive grid `start:stop:step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for SweepRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("expected start:stop:step, got {s:?}"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let r = SweepRange { start: num(a)?, stop: num(b)?, step: num(c)? };
        if !(r.step > 0.0) || r.stop < r.start || r.start < 0.0 || r.stop > 0.95 {
            return Err(format!("need 0 <= start <= stop <= 0.95 and step > 0, got {s:?}"));
        }
        Ok(r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Vertices found from fitted tracks.
    Tracks,
    /// Generator-level vertices stored in the event.
    Truth,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct PvArgs {
    /// Reconstruction result JSON.
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long)]
    pub event: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_SAMPLES)]
    pub min_samples: usize,
    /// Discard fractions as start:stop:step, e.g. 0:0.9:0.1.
    #[arg(long)]
    pub discard_sweep: Option<SweepRange>,
    /// Random subsamples per discard fraction.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Vertices the sweep is compared against.
    #[arg(long, value_enum, default_value = "tracks")]
    pub reference: Reference,
    /// Worker threads for the sweep; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Defaults to `<output stem>_mad.csv` when a sweep is requested.
    #[arg(long)]
    pub mad_csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct PvReport {
    eps: f64,
    min_samples: usize,
    segment_projections: Vec<BeamlineProjection>,
    segment_vertices: Vec<VertexEstimate>,
    track_vertices: Vec<VertexEstimate>,
    truth_vertices: Vec<f64>,
    difference: Option<PvDifference>,
    mad_curve: Option<MadCurve>,
    warnings: Vec<String>,
}

impl PvArgs {
    pub fn resolve(&mut self, dir: &Path) -> anyhow::Result<()> {
        self.result = absolute(&self.result)?;
        self.event = absolute(&self.event)?;
        let output = output_path(&self.output, dir, "vertices.json")?;
        if self.discard_sweep.is_some() && self.mad_csv.is_none() {
            let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            self.mad_csv = Some(output.with_file_name(format!("{stem}_mad.csv")));
        }
        self.mad_csv = self.mad_csv.as_deref().map(absolute).transpose()?;
        self.output = Some(output);
        Ok(())
    }

    pub fn outputs_mut(&mut self) -> Vec<&mut PathBuf> {
        [&mut self.output, &mut self.mad_csv].into_iter().flatten().collect()
    }

    fn sweep(&self, range: SweepRange, projections: &[BeamlineProjection], reference: &[f64]) -> anyhow::Result<MadCurve> {
        let fractions = range.values();
        let params = SweepParams { eps: self.eps, min_samples: self.min_samples, base_seed: self.seed };
        let grid: Vec<(usize, u64)> = (0..fractions.len()).flat_map(|f| (0..self.seeds as u64).map(move |s| (f, s))).collect();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(self.jobs.max(1)).build()?;
        let flat = pool.install(|| {
            grid.par_iter()
                .map(|&(f, s)| discard_point(projections, fractions[f], s, &params, reference))
                .collect::<trackhhl_core::Result<Vec<_>>>()
        })?;
        let samples: Vec<Vec<_>> = flat.chunks(self.seeds.max(1)).map(<[_]>::to_vec).collect();
        Ok(MadCurve::from_samples(&fractions, &samples, reference.len()))
    }

    pub fn run(&self) -> anyhow::Result<Outcome> {
        if self.seeds == 0 {
            return Err(trackhhl_core::Error::Config("--seeds must be >= 1".into()).into());
        }
        if !(self.eps > 0.0) || self.min_samples == 0 {
            return Err(trackhhl_core::Error::Config("need eps > 0 and min_samples >= 1".into()).into());
        }
        let mut out = Outcome::new(self, self.discard_sweep.map(|_| self.seed))?;
        out.inputs = vec![self.result.clone(), self.event.clone()];
        let result: ReconstructionResult = read_json(&self.result)?;
        let event = read_event(&self.event)?;
        let mut warnings = Vec::new();

        let seg = segment_projections(&result, &event).context("extrapolating segments")?;
        let trk = track_projections(&result, &event).context("extrapolating tracks")?;
        if seg.is_empty() {
            warnings.push("no active segments; no vertices found".to_string());
        }
        let segment_vertices = cluster_z(&seg, self.eps, self.min_samples, VertexSource::Segments)?;
        let track_vertices = cluster_z(&trk, self.eps, self.min_samples, VertexSource::Tracks)?;
        let seg_z: Vec<f64> = segment_vertices.iter().map(|v| v.z).collect();
        let trk_z: Vec<f64> = track_vertices.iter().map(|v| v.z).collect();
        let difference = if seg_z.is_empty() || trk_z.is_empty() { None } else { Some(pv_difference(&seg_z, &trk_z)?) };
        let truth_vertices: Vec<f64> = event.pvs.iter().map(|p| p[2]).collect();

        let reference = match self.reference {
            Reference::Tracks => trk_z.clone(),
            Reference::Truth => truth_vertices.clone(),
        };
        let mad_curve = match self.discard_sweep {
            Some(range) => {
                if reference.is_empty() {
                    warnings.push("no reference vertices; every sweep point reports missing vertices".to_string());
                }
                Some(out.timings.time("discard_sweep", || self.sweep(range, &seg, &reference))?)
            }
            None => None,
        };

        let csv = match &mad_curve {
            Some(curve) => {
                let mut buf = Vec::new();
                curve.write_csv(&mut buf)?;
                Some(buf)
            }
            None => None,
        };
        let report = PvReport {
            eps: self.eps,
            min_samples: self.min_samples,
            segment_projections: seg,
            segment_vertices,
            track_vertices,
            truth_vertices,
            difference,
            mad_curve,
            warnings: warnings.clone(),
        };
        out.add_json(self.output.as_ref().expect("resolved"), &report)?;
        if let (Some(path), Some(buf)) = (&self.mad_csv, csv) {
            out.add_bytes(path, buf);
        }
        out.warnings = warnings;
        Ok(out)
    }
}
