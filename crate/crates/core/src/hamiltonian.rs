//! Segments, the angular compatibility function and the linear system
//! obtained from the gradient of the segment Hamiltonian
//!
//! ```text
//! H(S) = -1/2 sum_{i != j} f_ij S_i S_j + alpha sum_i S_i^2 + beta sum_i (1 - S_i)^2
//! ```
//!
//! where `f_ij = 1` when segments `i` and `j` meet at a hit and their
//! directions satisfy `cos(theta) >= 1 - epsilon`. Setting the gradient to
//! zero gives `A S = b` with `A_ii = alpha + beta`, `A_ij = -f_ij / 2` and
//! `b = beta (1, ..., 1)`, so that `grad H = 2 (A S - b)`.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::toy_model::Event;

/// A doublet: a candidate connection between hits on adjacent layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub from_hit: usize,
    pub to_hit: usize,
    pub layer_gap: (usize, usize),
    pub from: [f64; 3],
    pub to: [f64; 3],
    /// Unit vector from `from` to `to`; zero for a zero-length segment.
    pub direction: [f64; 3],
    pub length: f64,
}

impl Segment {
    pub fn new(index: usize, from_hit: usize, to_hit: usize, layer: usize, from: [f64; 3], to: [f64; 3]) -> Self {
        let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
        let length = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let direction = if length > 0.0 {
            [d[0] / length, d[1] / length, d[2] / length]
        } else {
            [0.0; 3]
        };
        Segment {
            index,
            from_hit,
            to_hit,
            layer_gap: (layer, layer + 1),
            from,
            to,
            direction,
            length,
        }
    }

    /// Transverse slopes `(dx/dz, dy/dz)`.
    pub fn slopes(&self) -> (f64, f64) {
        let dz = self.to[2] - self.from[2];
        ((self.to[0] - self.from[0]) / dz, (self.to[1] - self.from[1]) / dz)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HitSegments {
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSet {
    pub segments: Vec<Segment>,
    pub by_shared_hit: BTreeMap<usize, HitSegments>,
}

impl SegmentSet {
    pub fn from_segments(segments: Vec<Segment>) -> Self {
        let mut by_shared_hit: BTreeMap<usize, HitSegments> = BTreeMap::new();
        for s in &segments {
            by_shared_hit.entry(s.from_hit).or_default().outgoing.push(s.index);
            by_shared_hit.entry(s.to_hit).or_default().incoming.push(s.index);
        }
        SegmentSet { segments, by_shared_hit }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Indices of segments whose two hits belong to the same particle.
    pub fn truth_active(&self, event: &Event) -> Vec<usize> {
        let owner: HashMap<usize, Option<usize>> =
            event.hits.iter().map(|h| (h.id, h.truth_particle)).collect();
        self.segments
            .iter()
            .filter(|s| {
                matches!((owner.get(&s.from_hit), owner.get(&s.to_hit)),
                    (Some(Some(a)), Some(Some(b))) if a == b)
            })
            .map(|s| s.index)
            .collect()
    }

    /// All pairs `(i, j)` with `segment i` ending at the hit where `segment j`
    /// starts.
    pub fn meeting_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.by_shared_hit.values().flat_map(|hs| {
            hs.incoming
                .iter()
                .flat_map(move |&i| hs.outgoing.iter().map(move |&j| (i, j)))
        })
    }
}

/// All doublets between adjacent layers, ordered by `(layer_gap, from_hit,
/// to_hit)`. With `max_slope` only doublets with `|dx/dz|` and `|dy/dz|` not
/// above the cut are kept.
pub fn enumerate_segments(event: &Event, max_slope: Option<f64>) -> SegmentSet {
    let layers = event.hits_by_layer();
    let mut segments = Vec::new();
    for l in 0..layers.len().saturating_sub(1) {
        for a in &layers[l] {
            for b in &layers[l + 1] {
                let s = Segment::new(segments.len(), a.id, b.id, l, a.position(), b.position());
                if let Some(cut) = max_slope {
                    let (sx, sy) = s.slopes();
                    if sx.abs() > cut || sy.abs() > cut {
                        continue;
                    }
                }
                segments.push(s);
            }
        }
    }
    SegmentSet::from_segments(segments)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    /// Angular tolerance on `cos(theta)`.
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for HamiltonianParams {
    fn default() -> Self {
        HamiltonianParams { epsilon: 1e-6, alpha: 1.0, beta: 1.0 }
    }
}

impl HamiltonianParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon {} outside [0, 2]", self.epsilon)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Cosine of the angle between two segments.
pub fn cos_angle(s1: &Segment, s2: &Segment) -> Result<f64> {
    for s in [s1, s2] {
        if s.length <= 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "segment {} ({} -> {}) has zero length",
                s.index, s.from_hit, s.to_hit
            )));
        }
    }
    let (a, b) = (s1.direction, s2.direction);
    Ok(a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
}

/// Angular compatibility `f`: true when `s1` ends where `s2` starts and
/// `cos(theta) >= 1 - epsilon`. Segments that do not meet are never aligned.
pub fn alignment(s1: &Segment, s2: &Segment, epsilon: f64) -> Result<bool> {
    if s1.to_hit != s2.from_hit {
        return Ok(false);
    }
    Ok(cos_angle(s1, s2)? >= 1.0 - epsilon)
}

/// Aligned pairs `(i, j)`, `i` ending where `j` starts, sorted.
pub fn aligned_pairs(segs: &SegmentSet, epsilon: f64) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (i, j) in segs.meeting_pairs() {
        if alignment(&segs.segments[i], &segs.segments[j], epsilon)? {
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}

/// `A S = b` with `A` stored sparse.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub n: usize,
    pub matrix_a: CsrMatrix,
    pub vector_b: Vec<f64>,
    pub params: HamiltonianParams,
}

pub fn build_system(segs: &SegmentSet, params: &HamiltonianParams) -> Result<LinearSystem> {
    params.validate()?;
    let n = segs.len();
    if n == 0 {
        return Err(Error::Contract("cannot build a system without segments".into()));
    }
    let pairs = aligned_pairs(segs, params.epsilon)?;
    let mut triplets = Vec::with_capacity(n + 2 * pairs.len());
    triplets.extend((0..n).map(|i| (i, i, params.alpha + params.beta)));
    for (i, j) in pairs {
        triplets.push((i, j, -0.5));
        triplets.push((j, i, -0.5));
    }
    Ok(LinearSystem {
        n,
        matrix_a: CsrMatrix::from_triplets(n, triplets),
        vector_b: vec![params.beta; n],
        params: *params,
    })
}

/// Energy of a (relaxed) segment assignment.
pub fn hamiltonian_value(s: &[f64], segs: &SegmentSet, params: &HamiltonianParams) -> Result<f64> {
    if s.len() != segs.len() {
        return Err(Error::Contract(format!(
            "assignment has {} entries for {} segments",
            s.len(),
            segs.len()
        )));
    }
    // each meeting pair appears once here; the double sum over i != j counts it twice
    let angular: f64 = aligned_pairs(segs, params.epsilon)?
        .into_iter()
        .map(|(i, j)| s[i] * s[j])
        .sum();
    let spec: f64 = s.iter().map(|v| v * v).sum();
    let gap: f64 = s.iter().map(|v| (1.0 - v) * (1.0 - v)).sum();
    Ok(-angular + params.alpha * spec + params.beta * gap)
}

impl LinearSystem {
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.matrix_a.mul_vec(x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix_a.to_dense()
    }

    /// Residual `A x - b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.mul_vec(x)
            .into_iter()
            .zip(&self.vector_b)
            .map(|(ax, b)| ax - b)
            .collect()
    }

    pub fn offdiag_nnz(&self) -> usize {
        self.matrix_a.triplets().filter(|(r, c, _)| r != c).count()
    }

    /// Number of aligned partners of each segment.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n)
            .map(|r| self.matrix_a.row(r).filter(|&(c, _)| c != r).count())
            .collect()
    }

    /// Dense copy padded to `n_pad` with decoupled rows: diagonal
    /// `alpha + beta`, zero right-hand side.
    pub fn padded(&self, n_pad: usize) -> (DMatrix<f64>, Vec<f64>) {
        assert!(n_pad >= self.n);
        let mut a = DMatrix::zeros(n_pad, n_pad);
        for (r, c, v) in self.matrix_a.triplets() {
            a[(r, c)] = v;
        }
        let diag = self.params.alpha + self.params.beta;
        for i in self.n..n_pad {
            a[(i, i)] = diag;
        }
        let mut b = self.vector_b.clone();
        b.resize(n_pad, 0.0);
        (a, b)
    }

    /// Coordinate text format: a header line holding `n`, then one
    /// `row col value` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# alpha={} beta={} epsilon={}",
            self.params.alpha, self.params.beta, self.params.epsilon
        )?;
        writeln!(w, "{}", self.n)?;
        for (r, c, v) in self.matrix_a.triplets() {
            writeln!(w, "{r} {c} {v}")?;
        }
        Ok(())
    }

    /// Dense matrix as CSV, one row per segment.
    pub fn write_heatmap_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.n).map(|c| c.to_string()).collect();
        writeln!(w, "segment,{}", header.join(","))?;
        for r in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|c| self.matrix_a.get(r, c).to_string()).collect();
            writeln!(w, "{r},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Reads the coordinate format written by [`LinearSystem::write_coordinate`].
pub fn read_coordinate<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let mut n = None;
    let mut triplets = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Parse(format!("line {}: {line:?}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (n, fields.as_slice()) {
            (None, [size]) => n = Some(size.parse::<usize>().map_err(|_| bad())?),
            (Some(size), [r, c, v]) => {
                let r: usize = r.parse().map_err(|_| bad())?;
                let c: usize = c.parse().map_err(|_| bad())?;
                let v: f64 = v.parse().map_err(|_| bad())?;
                if r >= size || c >= size {
                    return Err(bad());
                }
                triplets.push((r, c, v));
            }
            _ => return Err(bad()),
        }
    }
    let n = n.ok_or_else(|| Error::Parse("missing dimension header".into()))?;
    Ok(CsrMatrix::from_triplets(n, triplets))
}
