//! Event in, reconstruction out.

use serde::{Deserialize, Serialize};

use crate::classical::{
    build_tracks, condition_number, discretize, score, solve, ActiveSet, EfficiencyReport, SolutionVector,
    SolveMethod, TrackCollection, DEFAULT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_system, enumerate_segments, HamiltonianParams, LinearSystem, SegmentSet};
use crate::hhl::{classify, required_shots, run, ClassifyRule, HhlConfig, QuantumResult};
use crate::pv::{extrapolate_to_beamline, extrapolate_track, BeamlineProjection};
use crate::toy_model::Event;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Classical,
    Hhl,
    Hhl1bit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructConfig {
    pub method: Method,
    pub params: HamiltonianParams,
    pub max_slope: Option<f64>,
    pub solver: SolveMethod,
    pub tolerance: f64,
    pub threshold: f64,
    pub hhl: HhlConfig,
    pub classify: ClassifyRule,
    /// Confidence used for the shot estimate of quantum runs.
    pub shot_confidence: f64,
}

impl ReconstructConfig {
    pub fn new(method: Method) -> Self {
        ReconstructConfig {
            method,
            params: HamiltonianParams::default(),
            max_slope: None,
            solver: SolveMethod::Direct,
            tolerance: 1e-10,
            threshold: DEFAULT_THRESHOLD,
            hhl: match method {
                Method::Hhl => HhlConfig::full(5),
                _ => HhlConfig::one_bit(),
            },
            classify: ClassifyRule::LargestGap,
            shot_confidence: 0.99,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSegment {
    pub index: usize,
    pub from_hit: usize,
    pub to_hit: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub config: ReconstructConfig,
    pub n_segments: usize,
    pub solution: Option<SolutionVector>,
    pub quantum: Option<QuantumResult>,
    pub active_segments: Vec<ActiveSegment>,
    pub threshold_used: f64,
    pub tracks: TrackCollection,
    pub report: EfficiencyReport,
    pub condition_number: Option<f64>,
    pub required_shots: Option<u64>,
    pub warnings: Vec<String>,
}

impl ReconstructionResult {
    pub fn active_set(&self) -> ActiveSet {
        ActiveSet { active: self.active_segments.iter().map(|s| s.index).collect(), threshold_used: self.threshold_used }
    }
}

/// Everything produced on the way to a [`ReconstructionResult`].
pub struct Reconstruction {
    pub segments: SegmentSet,
    pub system: Option<LinearSystem>,
    pub result: ReconstructionResult,
}

pub fn reconstruct(event: &Event, cfg: &ReconstructConfig) -> Result<Reconstruction> {
    cfg.params.validate()?;
    let segments = enumerate_segments(event, cfg.max_slope);
    let mut warnings = Vec::new();
    if segments.is_empty() {
        warnings.push("event has no candidate segments".to_string());
        let active = discretize(&[], cfg.threshold);
        let tracks = TrackCollection::default();
        let report = score(&tracks, &active, &segments, event);
        let result = ReconstructionResult {
            config: *cfg,
            n_segments: 0,
            solution: None,
            quantum: None,
            active_segments: Vec::new(),
            threshold_used: cfg.threshold,
            tracks,
            report,
            condition_number: None,
            required_shots: None,
            warnings,
        };
        return Ok(Reconstruction { segments, system: None, result });
    }
    let system = build_system(&segments, &cfg.params)?;
    let kappa = condition_number(&system)?;

    let (solution, quantum, active) = match cfg.method {
        Method::Classical => {
            let s = solve(&system, cfg.solver, cfg.tolerance)?;
            let active = discretize(&s.values, cfg.threshold);
            (Some(s), None, active)
        }
        Method::Hhl | Method::Hhl1bit => {
            let mut hhl = cfg.hhl;
            hhl.variant = if cfg.method == Method::Hhl { crate::hhl::Variant::Full } else { crate::hhl::Variant::OneBit };
            let q = run(&system, &hhl)?;
            if q.degenerate {
                warnings.push("post-selection left nothing; spectrum is flat".to_string());
            }
            let active = classify(&q, cfg.classify);
            if active.is_empty() && cfg.classify == ClassifyRule::LargestGap {
                warnings.push("no clear gap in the spectrum; no segment classified active".to_string());
            }
            (None, Some(q), active)
        }
    };
    let required = quantum.as_ref().and_then(|q| {
        let p: Vec<f64> = active.active.iter().map(|&i| q.probabilities[i]).collect();
        required_shots(&p, cfg.shot_confidence)
    });

    let tracks = build_tracks(&active, &segments);
    let report = score(&tracks, &active, &segments, event);
    let result = ReconstructionResult {
        config: *cfg,
        n_segments: segments.len(),
        solution,
        quantum,
        active_segments: active
            .active
            .iter()
            .map(|&i| ActiveSegment { index: i, from_hit: segments.segments[i].from_hit, to_hit: segments.segments[i].to_hit })
            .collect(),
        threshold_used: active.threshold_used,
        tracks,
        report,
        condition_number: Some(kappa),
        required_shots: required,
        warnings,
    };
    Ok(Reconstruction { segments, system: Some(system), result })
}

fn position(event: &Event, id: usize) -> Result<[f64; 3]> {
    event
        .hit(id)
        .map(|h| h.position())
        .ok_or_else(|| Error::Contract(format!("hit {id} is not in the event")))
}

/// Beam-axis projections of the active segments.
pub fn segment_projections(result: &ReconstructionResult, event: &Event) -> Result<Vec<BeamlineProjection>> {
    result
        .active_segments
        .iter()
        .map(|s| extrapolate_to_beamline(s.index, position(event, s.from_hit)?, position(event, s.to_hit)?))
        .collect()
}

/// Beam-axis projections of straight-line fits to the tracks.
pub fn track_projections(result: &ReconstructionResult, event: &Event) -> Result<Vec<BeamlineProjection>> {
    result
        .tracks
        .tracks
        .iter()
        .enumerate()
        .map(|(i, t)| extrapolate_track(i, &t.iter().map(|&h| position(event, h)).collect::<Result<Vec<_>>>()?))
        .collect()
}
