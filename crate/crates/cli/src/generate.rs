use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use trackhhl_core::toy_model::{generate_event, minimal_event};
use trackhhl_core::{DetectorConfig, Event};

use crate::manifest::Outcome;
use crate::output_path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Two particles from the origin crossing three layers.
    Minimal,
    /// Ideal five-layer event with three well separated vertices.
    ThreePv,
    /// Three vertices with hit smearing, for vertex robustness studies.
    Smeared,
}

impl Preset {
    pub fn config(self) -> Option<DetectorConfig> {
        match self {
            Preset::Minimal => None,
            Preset::ThreePv => Some(DetectorConfig::new(5, 18).with_vertices(3, 30.0).with_seed(4)),
            Preset::Smeared => {
                let mut cfg = DetectorConfig::new(5, 30).with_vertices(3, 30.0).with_seed(4);
                cfg.hit_resolution_xy = 0.01;
                Some(cfg)
            }
        }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long, required_unless_present = "preset")]
    pub layers: Option<usize>,
    #[arg(long, required_unless_present = "preset")]
    pub particles: Option<usize>,
    #[arg(long, value_enum, conflicts_with_all = ["layers", "particles"])]
    pub preset: Option<Preset>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub vertices: usize,
    /// Standard deviation of vertex z positions.
    #[arg(long, default_value_t = 5.0)]
    pub pv_spread: f64,
    #[arg(long, default_value_t = 0.3)]
    pub slope_range: f64,
    #[arg(long, default_value_t = 20.0)]
    pub layer_spacing: f64,
    /// Transverse hit smearing.
    #[arg(long, default_value_t = 0.0)]
    pub resolution: f64,
    #[arg(long, default_value_t = 1.0)]
    pub efficiency: f64,
    /// Per-layer scattering kink, radians.
    #[arg(long, default_value_t = 0.0)]
    pub scattering: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

impl GenerateArgs {
    pub fn resolve(&mut self, dir: &Path) -> anyhow::Result<()> {
        self.output = Some(output_path(&self.output, dir, "event.json")?);
        Ok(())
    }

    pub fn outputs_mut(&mut self) -> Vec<&mut PathBuf> {
        self.output.iter_mut().collect()
    }

    fn detector(&self) -> Option<DetectorConfig> {
        if let Some(p) = self.preset {
            return p.config();
        }
        let layers = self.layers?;
        let mut cfg = DetectorConfig::new(layers, self.particles?)
            .with_vertices(self.vertices, self.pv_spread)
            .with_seed(self.seed);
        cfg.layer_z = (1..=layers).map(|l| self.layer_spacing * l as f64).collect();
        cfg.slope_range = self.slope_range;
        cfg.hit_resolution_xy = self.resolution;
        cfg.hit_efficiency = self.efficiency;
        cfg.scattering_angle_sigma = self.scattering;
        Some(cfg)
    }

    pub fn run(&self) -> anyhow::Result<Outcome> {
        let mut timings = crate::manifest::Timings::default();
        let event: Event = match self.detector() {
            Some(cfg) => timings.time("generate", || generate_event(&cfg))?,
            None => minimal_event(),
        };
        let mut out = Outcome::new(&event.config, Some(event.config.seed))?;
        out.timings = timings;
        out.add_json(self.output.as_ref().expect("resolved"), &event)?;
        Ok(out)
    }
}
