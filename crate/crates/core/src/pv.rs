//! Primary-vertex finding from active segments or tracks: extrapolation to
//! the beam axis, 1-D density clustering in z and comparison of vertex lists.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1.0;
pub const DEFAULT_MIN_SAMPLES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamlineProjection {
    /// Segment or track index the projection came from.
    pub index: usize,
    pub z0: f64,
    pub doca: f64,
    /// The line runs parallel to the beam axis; `z0` is the midpoint.
    pub degenerate: bool,
}

/// Closest approach of the line through `p1` and `p2` to the z axis.
pub fn extrapolate_to_beamline(index: usize, p1: [f64; 3], p2: [f64; 3]) -> Result<BeamlineProjection> {
    let dz = p2[2] - p1[2];
    if dz == 0.0 {
        return Err(Error::DegenerateGeometry(format!("line {index} does not advance in z")));
    }
    let (sx, sy) = ((p2[0] - p1[0]) / dz, (p2[1] - p1[1]) / dz);
    project_line(index, p1, sx, sy, 0.5 * (p1[2] + p2[2]))
}

fn project_line(index: usize, p: [f64; 3], sx: f64, sy: f64, midpoint: f64) -> Result<BeamlineProjection> {
    let s2 = sx * sx + sy * sy;
    if s2 == 0.0 {
        return Ok(BeamlineProjection { index, z0: midpoint, doca: p[0].hypot(p[1]), degenerate: true });
    }
    let z0 = p[2] - (p[0] * sx + p[1] * sy) / s2;
    let (x, y) = (p[0] + (z0 - p[2]) * sx, p[1] + (z0 - p[2]) * sy);
    Ok(BeamlineProjection { index, z0, doca: x.hypot(y), degenerate: false })
}

/// Least-squares straight line `x = x0 + sx z`, `y = y0 + sy z` through
/// the hits, extrapolated to the beam axis.
pub fn extrapolate_track(index: usize, hits: &[[f64; 3]]) -> Result<BeamlineProjection> {
    if hits.len() < 2 {
        return Err(Error::DegenerateGeometry(format!("track {index} has fewer than two hits")));
    }
    let n = hits.len() as f64;
    let mz = hits.iter().map(|h| h[2]).sum::<f64>() / n;
    let szz: f64 = hits.iter().map(|h| (h[2] - mz).powi(2)).sum();
    if szz == 0.0 {
        return Err(Error::DegenerateGeometry(format!("track {index} does not advance in z")));
    }
    let fit = |k: usize| {
        let m = hits.iter().map(|h| h[k]).sum::<f64>() / n;
        let s = hits.iter().map(|h| (h[k] - m) * (h[2] - mz)).sum::<f64>() / szz;
        (m, s)
    };
    let ((mx, sx), (my, sy)) = (fit(0), fit(1));
    project_line(index, [mx, my, mz], sx, sy, mz)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexSource {
    Segments,
    Tracks,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexEstimate {
    pub z: f64,
    pub n_members: usize,
    pub source: VertexSource,
}

/// One-dimensional DBSCAN. Returns `(mean, size)` per cluster in increasing
/// z. Border points join the cluster of their nearest core point.
pub fn dbscan_1d(values: &[f64], eps: f64, min_samples: usize) -> Vec<(f64, usize)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let z: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let n = z.len();

    // neighbourhood sizes via a sliding window over the sorted values
    let mut core = vec![false; n];
    let (mut lo, mut hi) = (0, 0);
    for i in 0..n {
        while z[i] - z[lo] > eps {
            lo += 1;
        }
        while hi < n && z[hi] - z[i] <= eps {
            hi += 1;
        }
        core[i] = hi - lo >= min_samples;
    }

    let mut label = vec![usize::MAX; n];
    let mut n_clusters = 0;
    let mut last_core: Option<usize> = None;
    for i in (0..n).filter(|&i| core[i]) {
        match last_core {
            Some(j) if z[i] - z[j] <= eps => label[i] = label[j],
            _ => {
                label[i] = n_clusters;
                n_clusters += 1;
            }
        }
        last_core = Some(i);
    }

    let cores: Vec<usize> = (0..n).filter(|&i| core[i]).collect();
    for i in (0..n).filter(|&i| !core[i]) {
        let k = cores.partition_point(|&c| z[c] < z[i]);
        let mut best: Option<(f64, usize)> = None;
        for &c in cores[k.saturating_sub(1)..(k + 1).min(cores.len())].iter() {
            let d = (z[c] - z[i]).abs();
            if d <= eps && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, c));
            }
        }
        if let Some((_, c)) = best {
            label[i] = label[c];
        }
    }

    let mut sums = vec![(0.0, 0usize); n_clusters];
    for i in 0..n {
        if label[i] != usize::MAX {
            sums[label[i]].0 += z[i];
            sums[label[i]].1 += 1;
        }
    }
    sums.into_iter().map(|(s, c)| (s / c as f64, c)).collect()
}

pub fn cluster_z(projections: &[BeamlineProjection], eps: f64, min_samples: usize, source: VertexSource) -> Result<Vec<VertexEstimate>> {
    if !(eps > 0.0) || min_samples == 0 {
        return Err(Error::Config(format!("need eps > 0 and min_samples >= 1, got {eps} and {min_samples}")));
    }
    let zs: Vec<f64> = projections.iter().map(|p| p.z0).collect();
    Ok(dbscan_1d(&zs, eps, min_samples)
        .into_iter()
        .map(|(z, n_members)| VertexEstimate { z, n_members, source })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub z_segment: f64,
    pub z_track: f64,
    /// `z_segment - z_track`.
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvDifference {
    pub pairs: Vec<MatchedPair>,
    pub mad: f64,
    pub unmatched_segment: Vec<f64>,
    pub unmatched_track: Vec<f64>,
}

/// Greedy nearest matching in z: the globally closest unmatched pair is
/// taken first, ties going to the smaller z.
pub fn pv_difference(seg_pvs: &[f64], track_pvs: &[f64]) -> Result<PvDifference> {
    if seg_pvs.is_empty() || track_pvs.is_empty() {
        return Err(Error::Contract("vertex lists must be non-empty".into()));
    }
    let mut cand: Vec<(f64, f64, f64, usize, usize)> = Vec::with_capacity(seg_pvs.len() * track_pvs.len());
    for (i, &s) in seg_pvs.iter().enumerate() {
        for (j, &t) in track_pvs.iter().enumerate() {
            cand.push(((s - t).abs(), t, s, j, i));
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let (mut seg_used, mut trk_used) = (vec![false; seg_pvs.len()], vec![false; track_pvs.len()]);
    let mut pairs = Vec::new();
    for (_, t, s, j, i) in cand {
        if !seg_used[i] && !trk_used[j] {
            seg_used[i] = true;
            trk_used[j] = true;
            pairs.push(MatchedPair { z_segment: s, z_track: t, difference: s - t });
        }
    }
    pairs.sort_by(|a, b| a.z_track.total_cmp(&b.z_track));
    let mad = pairs.iter().map(|p| p.difference.abs()).sum::<f64>() / pairs.len() as f64;
    let unmatched = |v: &[f64], used: &[bool]| v.iter().zip(used).filter(|(_, u)| !**u).map(|(z, _)| *z).collect();
    Ok(PvDifference {
        mad,
        unmatched_segment: unmatched(seg_pvs, &seg_used),
        unmatched_track: unmatched(track_pvs, &trk_used),
        pairs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    /// `None` when no vertex survived.
    pub mad: Option<f64>,
    pub missing_vertices: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub eps: f64,
    pub min_samples: usize,
    pub base_seed: u64,
}

/// Keeps `round((1 - fraction) n)` projections chosen uniformly, reclusters
/// and compares against `reference_pvs`.
pub fn discard_point(
    projections: &[BeamlineProjection],
    fraction: f64,
    seed_index: u64,
    params: &SweepParams,
    reference_pvs: &[f64],
) -> Result<SweepSample> {
    if !(0.0..=0.95 + 1e-12).contains(&fraction) {
        return Err(Error::Config(format!("discard fraction {fraction} outside [0, 0.95]")));
    }
    let n = projections.len();
    let keep = ((1.0 - fraction) * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(params.base_seed.wrapping_add(seed_index));
    let mut idx = rand::seq::index::sample(&mut rng, n, keep.min(n)).into_vec();
    idx.sort_unstable();
    let kept: Vec<BeamlineProjection> = idx.into_iter().map(|i| projections[i]).collect();
    let found = cluster_z(&kept, params.eps, params.min_samples, VertexSource::Segments)?;
    if found.is_empty() || reference_pvs.is_empty() {
        return Ok(SweepSample { mad: None, missing_vertices: reference_pvs.len() });
    }
    let zs: Vec<f64> = found.iter().map(|v| v.z).collect();
    let diff = pv_difference(&zs, reference_pvs)?;
    Ok(SweepSample { mad: Some(diff.mad), missing_vertices: diff.unmatched_track.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MadCurve {
    pub discard_fractions: Vec<f64>,
    /// Mean over the seeds that found at least one vertex.
    pub mad_values: Vec<Option<f64>>,
    pub missing_vertex_rate: Vec<f64>,
    pub seeds_per_point: usize,
}

impl MadCurve {
    /// Aggregates `samples[f][s]` for fraction `f` and seed `s`.
    pub fn from_samples(fractions: &[f64], samples: &[Vec<SweepSample>], n_reference: usize) -> Self {
        let seeds = samples.first().map_or(0, Vec::len);
        let mut mad_values = Vec::with_capacity(fractions.len());
        let mut missing_vertex_rate = Vec::with_capacity(fractions.len());
        for row in samples {
            let mads: Vec<f64> = row.iter().filter_map(|s| s.mad).collect();
            mad_values.push((!mads.is_empty()).then(|| mads.iter().sum::<f64>() / mads.len() as f64));
            let missing: usize = row.iter().map(|s| s.missing_vertices).sum();
            missing_vertex_rate.push(if n_reference == 0 { 0.0 } else { missing as f64 / (n_reference * row.len()) as f64 });
        }
        MadCurve { discard_fractions: fractions.to_vec(), mad_values, missing_vertex_rate, seeds_per_point: seeds }
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "discard_fraction,mad,missing_vertex_rate")?;
        for ((f, m), r) in self.discard_fractions.iter().zip(&self.mad_values).zip(&self.missing_vertex_rate) {
            match m {
                Some(m) => writeln!(w, "{f:.4},{m:.12e},{r:.6}")?,
                None => writeln!(w, "{f:.4},,{r:.6}")?,
            }
        }
        Ok(())
    }
}

pub fn discard_sweep(
    projections: &[BeamlineProjection],
    fractions: &[f64],
    seeds: usize,
    params: &SweepParams,
    reference_pvs: &[f64],
) -> Result<MadCurve> {
    let samples = fractions
        .iter()
        .map(|&f| (0..seeds as u64).map(|s| discard_point(projections, f, s, params, reference_pvs)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(MadCurve::from_samples(fractions, &samples, reference_pvs.len()))
}
