//! Synthetic events for a planar multi-layer detector.
//!
//! Particles are straight lines leaving primary vertices on the beamline
//! (`x = y = 0`). Each line is intersected with every layer; the recorded
//! hit positions can then be degraded by Gaussian smearing, per-layer
//! scattering kinks and random inefficiency, applied in that order.
//! Lengths are in millimetres.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spacing of the default layer positions.
pub const DEFAULT_LAYER_SPACING: f64 = 20.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub n_layers: usize,
    pub layer_z: Vec<f64>,
    pub n_particles: usize,
    pub n_primary_vertices: usize,
    /// Standard deviation of the vertex z positions around 0.
    pub pv_spread_z: f64,
    /// Maximum |dx/dz| and |dy/dz| of generated particles.
    pub slope_range: f64,
    pub hit_resolution_xy: f64,
    pub hit_efficiency: f64,
    /// Per-layer kink in slope, radians.
    pub scattering_angle_sigma: f64,
    pub seed: u64,
}

impl DetectorConfig {
    /// Ideal detector with `n_layers` layers at 20, 40, ... mm and one vertex.
    pub fn new(n_layers: usize, n_particles: usize) -> Self {
        DetectorConfig {
            n_layers,
            layer_z: default_layer_z(n_layers),
            n_particles,
            n_primary_vertices: 1,
            pv_spread_z: 5.0,
            slope_range: 0.3,
            hit_resolution_xy: 0.0,
            hit_efficiency: 1.0,
            scattering_angle_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_vertices(mut self, n_primary_vertices: usize, pv_spread_z: f64) -> Self {
        self.n_primary_vertices = n_primary_vertices;
        self.pv_spread_z = pv_spread_z;
        self
    }

    pub fn with_layer_z(mut self, layer_z: Vec<f64>) -> Self {
        self.n_layers = layer_z.len();
        self.layer_z = layer_z;
        self
    }

    /// True when no smearing, scattering or inefficiency is configured.
    pub fn is_ideal(&self) -> bool {
        self.hit_resolution_xy == 0.0
            && self.scattering_angle_sigma == 0.0
            && self.hit_efficiency == 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers < 2 {
            return Err(Error::Config(format!(
                "need at least 2 layers, got {}",
                self.n_layers
            )));
        }
        if self.layer_z.len() != self.n_layers {
            return Err(Error::Config(format!(
                "layer_z has {} entries but n_layers is {}",
                self.layer_z.len(),
                self.n_layers
            )));
        }
        if self.layer_z.iter().any(|z| !z.is_finite()) {
            return Err(Error::Config("layer_z must be finite".into()));
        }
        if self.layer_z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("layer_z must be strictly increasing".into()));
        }
        if !(0.0..=1.0).contains(&self.hit_efficiency) {
            return Err(Error::Config(format!(
                "hit_efficiency {} outside [0, 1]",
                self.hit_efficiency
            )));
        }
        let sigmas = [
            ("pv_spread_z", self.pv_spread_z),
            ("slope_range", self.slope_range),
            ("hit_resolution_xy", self.hit_resolution_xy),
            ("scattering_angle_sigma", self.scattering_angle_sigma),
        ];
        for (name, v) in sigmas {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.n_particles > 0 && self.n_primary_vertices == 0 {
            return Err(Error::Config("particles need at least one primary vertex".into()));
        }
        Ok(())
    }
}

pub fn default_layer_z(n_layers: usize) -> Vec<f64> {
    (1..=n_layers).map(|l| DEFAULT_LAYER_SPACING * l as f64).collect()
}

/// A recorded hit. Serialised as `[id, layer, x, y, z, truth_particle|null]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "HitRow", from = "HitRow")]
pub struct Hit {
    pub id: usize,
    pub layer: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub truth_particle: Option<usize>,
}

type HitRow = (usize, usize, f64, f64, f64, Option<usize>);

impl From<Hit> for HitRow {
    fn from(h: Hit) -> Self {
        (h.id, h.layer, h.x, h.y, h.z, h.truth_particle)
    }
}

impl From<HitRow> for Hit {
    fn from((id, layer, x, y, z, truth_particle): HitRow) -> Self {
        Hit { id, layer, x, y, z, truth_particle }
    }
}

impl Hit {
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthParticle {
    pub id: usize,
    pub origin_pv: usize,
    pub slope_x: f64,
    pub slope_y: f64,
    pub origin: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub config: DetectorConfig,
    pub hits: Vec<Hit>,
    pub particles: Vec<TruthParticle>,
    pub pvs: Vec<[f64; 3]>,
}

impl Event {
    pub fn n_layers(&self) -> usize {
        self.config.n_layers
    }

    pub fn hit(&self, id: usize) -> Option<&Hit> {
        // ids equal positions for generated events; fall back to a scan otherwise
        match self.hits.get(id) {
            Some(h) if h.id == id => Some(h),
            _ => self.hits.iter().find(|h| h.id == id),
        }
    }

    /// Checks an event read from outside: valid config, unique ids, hits on
    /// known layers with finite coordinates, truth labels in range.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let mut seen = std::collections::HashSet::new();
        for h in &self.hits {
            if !seen.insert(h.id) {
                return Err(Error::Parse(format!("duplicate hit id {}", h.id)));
            }
            if h.layer >= self.n_layers() {
                return Err(Error::Parse(format!("hit {} on layer {} of {}", h.id, h.layer, self.n_layers())));
            }
            if !h.position().iter().all(|v| v.is_finite()) {
                return Err(Error::Parse(format!("hit {} has non-finite coordinates", h.id)));
            }
            if h.truth_particle.is_some_and(|p| p >= self.particles.len()) {
                return Err(Error::Parse(format!("hit {} refers to an unknown particle", h.id)));
            }
        }
        Ok(())
    }

    /// Hits grouped by layer, each group sorted by id.
    pub fn hits_by_layer(&self) -> Vec<Vec<&Hit>> {
        let mut layers: Vec<Vec<&Hit>> = vec![Vec::new(); self.n_layers()];
        for h in &self.hits {
            if h.layer < layers.len() {
                layers[h.layer].push(h);
            }
        }
        for l in &mut layers {
            l.sort_by_key(|h| h.id);
        }
        layers
    }

    /// Hit ids belonging to each truth particle, ordered by layer.
    pub fn particle_hits(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.particles.len()];
        let mut hits: Vec<&Hit> = self.hits.iter().collect();
        hits.sort_by_key(|h| (h.layer, h.id));
        for h in hits {
            if let Some(p) = h.truth_particle {
                if p < out.len() {
                    out[p].push(h.id);
                }
            }
        }
        out
    }
}

/// Generates one event. Identical configs (including the seed) give
/// bit-identical events.
pub fn generate_event(config: &DetectorConfig) -> Result<Event> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let pv_dist = normal(config.pv_spread_z);
    let pvs: Vec<[f64; 3]> = (0..config.n_primary_vertices)
        .map(|_| [0.0, 0.0, pv_dist.sample(&mut rng)])
        .collect();

    let r = config.slope_range;
    let particles: Vec<TruthParticle> = (0..config.n_particles)
        .map(|id| {
            let origin_pv = id % config.n_primary_vertices;
            let slope_x = rng.random_range(-r..=r);
            let slope_y = rng.random_range(-r..=r);
            TruthParticle { id, origin_pv, slope_x, slope_y, origin: pvs[origin_pv] }
        })
        .collect();

    let smear = normal(config.hit_resolution_xy);
    let kink = normal(config.scattering_angle_sigma);
    let mut raw = Vec::with_capacity(config.n_particles * config.n_layers);
    for p in &particles {
        let mut anchor = p.origin;
        let (mut sx, mut sy) = (p.slope_x, p.slope_y);
        for (layer, &z) in config.layer_z.iter().enumerate() {
            let x = anchor[0] + sx * (z - anchor[2]);
            let y = anchor[1] + sy * (z - anchor[2]);
            let xm = x + smear.sample(&mut rng);
            let ym = y + smear.sample(&mut rng);
            let dsx = kink.sample(&mut rng);
            let dsy = kink.sample(&mut rng);
            if config.scattering_angle_sigma > 0.0 {
                sx += dsx;
                sy += dsy;
                anchor = [x, y, z];
            }
            let recorded = rng.random::<f64>() < config.hit_efficiency;
            if recorded {
                raw.push((layer, p.id, xm, ym, z));
            }
        }
    }
    Ok(assemble(config.clone(), raw, particles, pvs))
}

/// Builds an ideal event from explicit particles. Hits are exact line/layer
/// intersections.
pub fn event_from_particles(
    config: DetectorConfig,
    pvs: Vec<[f64; 3]>,
    particles: Vec<TruthParticle>,
) -> Result<Event> {
    config.validate()?;
    let mut raw = Vec::new();
    for p in &particles {
        for (layer, &z) in config.layer_z.iter().enumerate() {
            let x = p.origin[0] + p.slope_x * (z - p.origin[2]);
            let y = p.origin[1] + p.slope_y * (z - p.origin[2]);
            raw.push((layer, p.id, x, y, z));
        }
    }
    Ok(assemble(config, raw, particles, pvs))
}

fn assemble(
    config: DetectorConfig,
    mut raw: Vec<(usize, usize, f64, f64, f64)>,
    particles: Vec<TruthParticle>,
    pvs: Vec<[f64; 3]>,
) -> Event {
    raw.sort_by_key(|&(layer, particle, ..)| (layer, particle));
    let hits = raw
        .into_iter()
        .enumerate()
        .map(|(id, (layer, particle, x, y, z))| Hit {
            id,
            layer,
            x,
            y,
            z,
            truth_particle: Some(particle),
        })
        .collect();
    Event { config, hits, particles, pvs }
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative")
}

/// The smallest non-trivial event: two particles from one vertex at the
/// origin crossing three layers.
pub fn minimal_event() -> Event {
    let mut config = DetectorConfig::new(3, 2);
    config.pv_spread_z = 0.0;
    let pv = [0.0, 0.0, 0.0];
    let particles = vec![
        TruthParticle { id: 0, origin_pv: 0, slope_x: 0.10, slope_y: 0.05, origin: pv },
        TruthParticle { id: 1, origin_pv: 0, slope_x: -0.08, slope_y: 0.12, origin: pv },
    ];
    event_from_particles(config, vec![pv], particles).expect("fixed fixture is valid")
}
