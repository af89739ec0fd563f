//! Classical solution of `A S = b`, thresholding, track assembly and scoring.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{cos_angle, LinearSystem, SegmentSet};
use crate::linalg::symmetric_eigen;
use crate::toy_model::Event;

/// Midway between the isolated-segment value `beta / (alpha + beta) = 0.5`
/// and the one-neighbour value `beta / (alpha + beta - 1/2) = 2/3` at
/// `alpha = beta = 1`.
pub const DEFAULT_THRESHOLD: f64 = 0.58;

/// Largest dimension handled with dense factorisations.
pub const DENSE_LIMIT: usize = 4096;
/// Largest system whose spectrum is computed densely; Lanczos above.
pub const DENSE_SPECTRUM_LIMIT: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Direct,
    ConjugateGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    /// `||A S - b||_2`.
    pub residual_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionVector {
    pub values: Vec<f64>,
    pub stats: SolverStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub active: BTreeSet<usize>,
    pub threshold_used: f64,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.active.contains(&i)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.active.iter().copied().collect()
    }
}

pub fn solve(system: &LinearSystem, method: SolveMethod, tol: f64) -> Result<SolutionVector> {
    let values = match method {
        SolveMethod::Direct => {
            let (values, _) = solve_direct(system)?;
            values
        }
        SolveMethod::ConjugateGradient => {
            let (values, iterations) = conjugate_gradient(system, tol, cg_max_iters(system.n))?;
            let residual_norm = norm(&system.residual(&values));
            return Ok(SolutionVector { values, stats: SolverStats { iterations, residual_norm } });
        }
    };
    let residual_norm = norm(&system.residual(&values));
    let b_norm = norm(&system.vector_b);
    if residual_norm > tol * b_norm {
        return Err(Error::NoConvergence { iterations: 1, residual: residual_norm / b_norm });
    }
    Ok(SolutionVector { values, stats: SolverStats { iterations: 1, residual_norm } })
}

fn cg_max_iters(n: usize) -> usize {
    (10 * n).max(1000)
}

fn solve_direct(system: &LinearSystem) -> Result<(Vec<f64>, f64)> {
    if system.n > DENSE_LIMIT {
        return Err(Error::Contract(format!(
            "direct solve is limited to n <= {DENSE_LIMIT}, got {}",
            system.n
        )));
    }
    let a = system.to_dense();
    let b = DVector::from_column_slice(&system.vector_b);
    match a.clone().cholesky() {
        Some(ch) => Ok((ch.solve(&b).as_slice().to_vec(), 0.0)),
        None => Err(Error::NotPositiveDefinite { min_eigenvalue: symmetric_eigen(&a)?.eigenvalues.min() }),
    }
}

fn conjugate_gradient(system: &LinearSystem, tol: f64, max_iters: usize) -> Result<(Vec<f64>, usize)> {
    let n = system.n;
    let b = &system.vector_b;
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..max_iters {
        if rr.sqrt() <= tol * b_norm {
            return Ok((x, it));
        }
        let ap = system.mul_vec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Rayleigh quotient along p bounds the smallest eigenvalue from above
            return Err(Error::NotPositiveDefinite { min_eigenvalue: pap / dot(&p, &p) });
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    if rr.sqrt() <= tol * b_norm {
        return Ok((x, max_iters));
    }
    Err(Error::NoConvergence { iterations: max_iters, residual: rr.sqrt() / b_norm })
}

/// Active iff `S_i >= threshold`.
pub fn discretize(solution: &[f64], threshold: f64) -> ActiveSet {
    ActiveSet {
        active: solution
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= threshold)
            .map(|(i, _)| i)
            .collect(),
        threshold_used: threshold,
    }
}

/// `lambda_max / lambda_min` of `A`.
pub fn condition_number(system: &LinearSystem) -> Result<f64> {
    let (lo, hi) = if system.n <= DENSE_SPECTRUM_LIMIT {
        let eig = symmetric_eigen(&system.to_dense())?.eigenvalues;
        (eig.min(), eig.max())
    } else {
        lanczos_extremes(system, 200)?
    };
    if lo <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
    }
    Ok(hi / lo)
}

/// Extremal Ritz values after `steps` Lanczos iterations with full
/// reorthogonalisation.
pub fn lanczos_extremes(system: &LinearSystem, steps: usize) -> Result<(f64, f64)> {
    let n = system.n;
    let m = steps.min(n).max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()).collect();
    let vn = norm(&v);
    v.iter_mut().for_each(|x| *x /= vn);
    let mut alphas = Vec::with_capacity(m);
    let mut betas: Vec<f64> = Vec::with_capacity(m);
    for k in 0..m {
        let mut w = system.mul_vec(&v);
        let a = dot(&w, &v);
        alphas.push(a);
        basis.push(v.clone());
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = norm(&w);
        if k + 1 == m || b < 1e-9 * a.abs().max(1.0) {
            break;
        }
        betas.push(b);
        v = w.into_iter().map(|x| x / b).collect();
    }
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = symmetric_eigen(&t)?.eigenvalues;
    Ok((eig.min(), eig.max()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackCollection {
    /// Hit ids of each track, ordered by layer.
    pub tracks: Vec<Vec<usize>>,
    /// Active segments not chained to any other.
    pub isolated: Vec<usize>,
}

/// Chains active segments into tracks. Where a hit offers several
/// continuations the straightest link wins; equal angles go to the lower
/// segment indices.
pub fn build_tracks(active: &ActiveSet, segs: &SegmentSet) -> TrackCollection {
    let mut links: Vec<(f64, usize, usize)> = segs
        .meeting_pairs()
        .filter(|&(i, j)| active.contains(i) && active.contains(j))
        .map(|(i, j)| {
            let c = cos_angle(&segs.segments[i], &segs.segments[j]).unwrap_or(-2.0);
            (c, i, j)
        })
        .collect();
    links.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut prev: HashMap<usize, usize> = HashMap::new();
    for (_, i, j) in links {
        if !next.contains_key(&i) && !prev.contains_key(&j) {
            next.insert(i, j);
            prev.insert(j, i);
        }
    }

    let mut out = TrackCollection::default();
    for &start in &active.active {
        if start >= segs.len() || prev.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        while let Some(&n) = next.get(chain.last().unwrap()) {
            chain.push(n);
        }
        if chain.len() >= 2 {
            let mut hits = vec![segs.segments[chain[0]].from_hit];
            hits.extend(chain.iter().map(|&s| segs.segments[s].to_hit));
            out.tracks.push(hits);
        } else {
            out.isolated.push(start);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub segment_efficiency: f64,
    pub segment_purity: f64,
    pub track_efficiency: f64,
    pub clone_rate: f64,
    pub ghost_rate: f64,
}

/// Fraction of a track's hits that must come from one particle for a match.
pub const MATCH_FRACTION: f64 = 0.7;

/// Scores reconstructed tracks and active segments against truth. Particles
/// with at least three recorded hits count as reconstructible.
pub fn score(tracks: &TrackCollection, active: &ActiveSet, segs: &SegmentSet, event: &Event) -> EfficiencyReport {
    let truth: BTreeSet<usize> = segs.truth_active(event).into_iter().collect();
    let hits_true_active = active.active.intersection(&truth).count() as f64;
    let segment_efficiency = if truth.is_empty() { 1.0 } else { hits_true_active / truth.len() as f64 };
    let segment_purity = if active.is_empty() { 1.0 } else { hits_true_active / active.len() as f64 };

    let owner: HashMap<usize, Option<usize>> = event.hits.iter().map(|h| (h.id, h.truth_particle)).collect();
    let reconstructible: BTreeSet<usize> = event
        .particle_hits()
        .iter()
        .enumerate()
        .filter(|(_, h)| h.len() >= 3)
        .map(|(p, _)| p)
        .collect();

    let mut matched_particles = BTreeSet::new();
    let mut matched_tracks = 0usize;
    for track in &tracks.tracks {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for h in track {
            if let Some(Some(p)) = owner.get(h) {
                *counts.entry(*p).or_default() += 1;
            }
        }
        let best = counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((p, c)) = best {
            if c as f64 >= MATCH_FRACTION * track.len() as f64 {
                matched_tracks += 1;
                matched_particles.insert(p);
            }
        }
    }
    let n_tracks = tracks.tracks.len() as f64;
    let track_efficiency = if reconstructible.is_empty() {
        0.0
    } else {
        matched_particles.intersection(&reconstructible).count() as f64 / reconstructible.len() as f64
    };
    let (ghost_rate, clone_rate) = if tracks.tracks.is_empty() {
        (0.0, 0.0)
    } else {
        (
            (tracks.tracks.len() - matched_tracks) as f64 / n_tracks,
            (matched_tracks - matched_particles.len()) as f64 / n_tracks,
        )
    };
    EfficiencyReport { segment_efficiency, segment_purity, track_efficiency, clone_rate, ghost_rate }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_system, enumerate_segments, HamiltonianParams, Segment};
    use crate::sparse::CsrMatrix;
    use crate::toy_model::minimal_event;
    use approx::assert_relative_eq;

    fn system(n: usize, triplets: Vec<(usize, usize, f64)>, beta: f64) -> LinearSystem {
        LinearSystem {
            n,
            matrix_a: CsrMatrix::from_triplets(n, triplets),
            vector_b: vec![beta; n],
            params: HamiltonianParams { epsilon: 1e-3, alpha: 1.0, beta },
        }
    }

    #[test]
    fn one_by_one_closed_form() {
        let sys = system(1, vec![(0, 0, 2.0)], 1.0);
        for m in [SolveMethod::Direct, SolveMethod::ConjugateGradient] {
            assert_relative_eq!(solve(&sys, m, 1e-12).unwrap().values[0], 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn aligned_pair_closed_form() {
        let sys = system(2, vec![(0, 0, 2.0), (1, 1, 2.0), (0, 1, -0.5), (1, 0, -0.5)], 1.0);
        for m in [SolveMethod::Direct, SolveMethod::ConjugateGradient] {
            let s = solve(&sys, m, 1e-12).unwrap();
            assert_relative_eq!(s.values[0], 2.0 / 3.0, epsilon = 1e-12);
            assert_relative_eq!(s.values[1], 2.0 / 3.0, epsilon = 1e-12);
        }
        assert_relative_eq!(condition_number(&sys).unwrap(), 2.5 / 1.5, epsilon = 1e-12);
    }

    #[test]
    fn identity_like_condition_number() {
        let sys = system(5, (0..5).map(|i| (i, i, 2.0)).collect(), 1.0);
        assert_relative_eq!(condition_number(&sys).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_pd_matrix_is_reported() {
        let sys = system(2, vec![(0, 0, 1.0), (1, 1, 1.0), (0, 1, -2.0), (1, 0, -2.0)], 1.0);
        match solve(&sys, SolveMethod::Direct, 1e-10) {
            Err(Error::NotPositiveDefinite { min_eigenvalue }) => {
                assert_relative_eq!(min_eigenvalue, -1.0, epsilon = 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(condition_number(&sys), Err(Error::NotPositiveDefinite { .. })));
        let neg = system(1, vec![(0, 0, -1.0)], 1.0);
        assert!(matches!(
            solve(&neg, SolveMethod::ConjugateGradient, 1e-10),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn cg_iteration_cap() {
        let sys = system(3, vec![(0, 0, 1.0), (1, 1, 10.0), (2, 2, 100.0)], 1.0);
        assert!(matches!(conjugate_gradient(&sys, 1e-14, 1), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn minimal_event_truth_segments_rank_highest() {
        let ev = minimal_event();
        let segs = enumerate_segments(&ev, None);
        let sys = build_system(&segs, &HamiltonianParams::default()).unwrap();
        let s = solve(&sys, SolveMethod::Direct, 1e-12).unwrap().values;
        let truth = segs.truth_active(&ev);
        let min_truth = truth.iter().map(|&i| s[i]).fold(f64::INFINITY, f64::min);
        let max_fake = (0..8).filter(|i| !truth.contains(i)).map(|i| s[i]).fold(f64::NEG_INFINITY, f64::max);
        assert!(min_truth > max_fake);
        let act = discretize(&s, DEFAULT_THRESHOLD);
        assert_eq!(act.to_vec(), truth);
        let cg = solve(&sys, SolveMethod::ConjugateGradient, 1e-13).unwrap().values;
        let diff = s.iter().zip(&cg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-8);
    }

    #[test]
    fn discretize_boundary() {
        assert_eq!(discretize(&[0.7, 0.4], 0.5).to_vec(), vec![0]);
        assert_eq!(discretize(&[0.5, 0.4], 0.5).to_vec(), vec![0]);
    }

    #[test]
    fn lanczos_matches_dense() {
        let ev = crate::toy_model::generate_event(&crate::toy_model::DetectorConfig::new(5, 6).with_seed(2)).unwrap();
        let segs = enumerate_segments(&ev, None);
        let sys = build_system(&segs, &HamiltonianParams::default()).unwrap();
        let eig = symmetric_eigen(&sys.to_dense()).unwrap().eigenvalues;
        let (lo, hi) = lanczos_extremes(&sys, 200).unwrap();
        assert_relative_eq!(lo, eig.min(), epsilon = 1e-8);
        assert_relative_eq!(hi, eig.max(), epsilon = 1e-8);
    }

    #[test]
    fn tracks_from_minimal_truth() {
        let ev = minimal_event();
        let segs = enumerate_segments(&ev, None);
        let act = ActiveSet { active: segs.truth_active(&ev).into_iter().collect(), threshold_used: 0.5 };
        let tc = build_tracks(&act, &segs);
        assert_eq!(tc.tracks, vec![vec![0, 2, 4], vec![1, 3, 5]]);
        assert!(tc.isolated.is_empty());
        let rep = score(&tc, &act, &segs, &ev);
        assert_eq!(rep, EfficiencyReport {
            segment_efficiency: 1.0,
            segment_purity: 1.0,
            track_efficiency: 1.0,
            clone_rate: 0.0,
            ghost_rate: 0.0,
        });
    }

    #[test]
    fn empty_active_set() {
        let ev = minimal_event();
        let segs = enumerate_segments(&ev, None);
        let act = discretize(&[0.0; 8], 0.5);
        let tc = build_tracks(&act, &segs);
        assert!(tc.tracks.is_empty());
        assert_eq!(score(&tc, &act, &segs, &ev).track_efficiency, 0.0);
    }

    #[test]
    fn clone_rate_for_duplicate_track() {
        let ev = minimal_event();
        let segs = enumerate_segments(&ev, None);
        let act = ActiveSet { active: BTreeSet::new(), threshold_used: 0.5 };
        let tc = TrackCollection { tracks: vec![vec![0, 2, 4], vec![0, 2, 4]], isolated: vec![] };
        let rep = score(&tc, &act, &segs, &ev);
        assert_eq!(rep.clone_rate, 0.5);
        assert_eq!(rep.ghost_rate, 0.0);
        assert_eq!(rep.track_efficiency, 0.5);
    }

    #[test]
    fn branching_prefers_straightest_link() {
        // hit 1 continues to either hit 2 (straight) or hit 3 (bent)
        let p0 = [0.0, 0.0, 0.0];
        let p1 = [0.0, 0.0, 10.0];
        let p2 = [0.0, 0.0, 20.0];
        let p3 = [2.0, 0.0, 20.0];
        let segs = SegmentSet::from_segments(vec![
            Segment::new(0, 0, 1, 0, p0, p1),
            Segment::new(1, 1, 3, 1, p1, p3),
            Segment::new(2, 1, 2, 1, p1, p2),
        ]);
        let act = ActiveSet { active: [0, 1, 2].into_iter().collect(), threshold_used: 0.5 };
        let tc = build_tracks(&act, &segs);
        assert_eq!(tc.tracks, vec![vec![0, 1, 2]]);
        assert_eq!(tc.isolated, vec![1]);
    }
}
