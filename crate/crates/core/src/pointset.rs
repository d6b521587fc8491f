//! Finite samples of point sets in R^d and their structural diagnostics.
//!
//! A [`PointSample`] is the restriction of a point set to a centered ball
//! (or, optionally, a centered axis-aligned box); it is the universal input
//! of all averaging operations in this crate. A [`WeightedComb`] is a finite
//! list of (position, complex weight) atoms and houses difference-vector
//! counts, autocorrelation estimates and diffraction atom lists alike.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::{ball_volume, dist, norm, norm_sq};

/// Relative factor applied to the characteristic scale (mean nearest
/// neighbour gap) to obtain the point-matching tolerance. Floating-point
/// realizations of irrational tile lengths never match exactly, so all
/// position comparisons are made up to this tolerance.
pub const MATCH_TOL_FACTOR: f64 = 1e-9;

/// Shape of the centered averaging region a sample was cut from.
///
/// Balls are the default; boxes are an alternative van Hove family and are
/// mainly used to check that results do not depend on the region shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Region {
    #[default]
    Ball,
    /// Centered axis-aligned cube of half-width equal to the sample radius.
    Box,
}

impl Region {
    pub fn contains(self, x: &[f64], r: f64) -> bool {
        match self {
            Region::Ball => norm_sq(x) <= r * r,
            Region::Box => x.iter().all(|c| c.abs() <= r),
        }
    }

    pub fn volume(self, dim: usize, r: f64) -> f64 {
        match self {
            Region::Ball => ball_volume(dim, r),
            Region::Box => (2.0 * r).powi(dim as i32),
        }
    }
}

/// A finite restriction of a point set to a centered region, together with
/// the provenance of the generating rule.
#[derive(Clone, Debug)]
pub struct PointSample {
    dim: usize,
    radius: f64,
    region: Region,
    /// Row-major coordinates, `len == n * dim`.
    coords: Vec<f64>,
    provenance: String,
}

impl PointSample {
    /// Builds a sample and validates the invariants: positive dimension and
    /// radius, finite coordinates, all points inside the region, and no two
    /// points closer than the matching tolerance.
    pub fn new(
        dim: usize,
        radius: f64,
        coords: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let s = Self::from_parts(dim, radius, Region::Ball, coords, provenance)?;
        s.check_separation()?;
        Ok(s)
    }

    /// Like [`PointSample::new`] but for box-shaped regions.
    pub fn new_box(
        dim: usize,
        radius: f64,
        coords: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let s = Self::from_parts(dim, radius, Region::Box, coords, provenance)?;
        s.check_separation()?;
        Ok(s)
    }

    /// Construction used by the generator modules, whose outputs are
    /// separated by construction; skips the O(n) separation check.
    pub(crate) fn from_generator(
        dim: usize,
        radius: f64,
        region: Region,
        coords: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        Self::from_parts(dim, radius, region, coords, provenance)
    }

    fn from_parts(
        dim: usize,
        radius: f64,
        region: Region,
        coords: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Degenerate("dimension must be positive".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Degenerate(format!("invalid radius {radius}")));
        }
        if coords.len() % dim != 0 {
            return Err(Error::ShapeMismatch(format!(
                "coordinate buffer length {} is not a multiple of dim {}",
                coords.len(),
                dim
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Degenerate("non-finite coordinate".into()));
        }
        // Tiny relative slack so points computed to sit exactly on the
        // boundary are not rejected for one ulp.
        let slack = radius * (1.0 + 1e-12);
        for p in coords.chunks_exact(dim) {
            if !region.contains(p, slack) {
                return Err(Error::OutOfWindow {
                    requested: norm(p),
                    available: radius,
                });
            }
        }
        Ok(Self {
            dim,
            radius,
            region,
            coords,
            provenance: provenance.into(),
        })
    }

    fn check_separation(&self) -> Result<()> {
        if self.len() < 2 {
            return Ok(());
        }
        let eps = self.matching_tolerance();
        let min_gap = nn_distances(&self.coords, self.dim)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_gap <= eps {
            return Err(Error::Degenerate(format!(
                "two points closer ({min_gap:e}) than the matching tolerance ({eps:e})"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Volume of the averaging region the sample was cut from.
    pub fn volume(&self) -> f64 {
        self.region.volume(self.dim, self.radius)
    }

    /// Point density estimate `card / vol`.
    pub fn density(&self) -> f64 {
        self.len() as f64 / self.volume()
    }

    /// Matching tolerance: `MATCH_TOL_FACTOR` times the mean nearest
    /// neighbour gap. Falls back to the sample radius as characteristic
    /// scale for empty and singleton samples.
    pub fn matching_tolerance(&self) -> f64 {
        matching_tolerance(&self.coords, self.dim, self.radius)
    }

    /// Restriction to the centered region of radius `r` (same shape).
    ///
    /// Returns exactly the points with `|x| <= r`; provenance is preserved.
    pub fn restrict(&self, r: f64) -> Result<PointSample> {
        if !(r > 0.0) {
            return Err(Error::Degenerate(format!("invalid radius {r}")));
        }
        if r > self.radius * (1.0 + 1e-12) {
            return Err(Error::OutOfWindow {
                requested: r,
                available: self.radius,
            });
        }
        let mut coords = Vec::new();
        for p in self.points() {
            if self.region.contains(p, r) {
                coords.extend_from_slice(p);
            }
        }
        Self::from_parts(self.dim, r, self.region, coords, self.provenance.clone())
    }

    /// Translate every point by `t`. Points pushed outside the region are
    /// dropped and the radius shrinks by `|t|` so the invariants still hold.
    pub fn translate(&self, t: &[f64]) -> Result<PointSample> {
        if t.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: t.len(),
            });
        }
        let shift = norm(t);
        let new_r = self.radius - shift;
        if !(new_r > 0.0) {
            return Err(Error::Degenerate(
                "translation larger than the sample radius".into(),
            ));
        }
        let mut coords = Vec::new();
        for p in self.points() {
            let q: Vec<f64> = p.iter().zip(t).map(|(x, s)| x + s).collect();
            if self.region.contains(&q, new_r) {
                coords.extend_from_slice(&q);
            }
        }
        Self::from_parts(
            self.dim,
            new_r,
            self.region,
            coords,
            format!("{}+translate", self.provenance),
        )
    }

    /// Lexicographic sort of the stored points; generators call this so that
    /// output order is deterministic regardless of enumeration strategy.
    pub(crate) fn sort_lex(&mut self) {
        let dim = self.dim;
        let mut rows: Vec<Vec<f64>> = self.coords.chunks_exact(dim).map(|p| p.to_vec()).collect();
        rows.sort_by(|a, b| lex_cmp(a, b));
        self.coords.clear();
        for r in rows {
            self.coords.extend_from_slice(&r);
        }
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

pub(crate) fn matching_tolerance(coords: &[f64], dim: usize, radius: f64) -> f64 {
    let n = coords.len() / dim.max(1);
    if n < 2 {
        return MATCH_TOL_FACTOR * radius.max(1.0);
    }
    let dists = nn_distances(coords, dim);
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    if mean > 0.0 {
        MATCH_TOL_FACTOR * mean
    } else {
        MATCH_TOL_FACTOR * radius.max(1.0)
    }
}

/// A finite list of (position, complex weight) atoms.
#[derive(Clone, Debug)]
pub struct WeightedComb {
    dim: usize,
    /// Row-major atom positions, `len == n * dim`.
    positions: Vec<f64>,
    weights: Vec<Complex64>,
}

impl WeightedComb {
    /// Builds a comb and validates: nonzero weights and pairwise distinct
    /// positions (up to the matching tolerance derived from the positions).
    pub fn new(dim: usize, positions: Vec<f64>, weights: Vec<Complex64>) -> Result<Self> {
        let c = Self::from_parts(dim, positions, weights)?;
        if c.len() >= 2 {
            let eps = matching_tolerance(&c.positions, dim, 1.0);
            let min_gap = nn_distances(&c.positions, dim)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if min_gap <= eps {
                return Err(Error::Degenerate(format!(
                    "two atoms closer ({min_gap:e}) than the matching tolerance ({eps:e})"
                )));
            }
        }
        Ok(c)
    }

    pub(crate) fn from_parts(
        dim: usize,
        positions: Vec<f64>,
        weights: Vec<Complex64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Degenerate("dimension must be positive".into()));
        }
        if positions.len() != weights.len() * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates vs {} weights in dimension {}",
                positions.len(),
                weights.len(),
                dim
            )));
        }
        if positions.iter().any(|c| !c.is_finite()) {
            return Err(Error::Degenerate("non-finite atom position".into()));
        }
        if weights.iter().any(|w| w.norm_sqr() == 0.0) {
            return Err(Error::Degenerate("zero atom weight".into()));
        }
        Ok(Self {
            dim,
            positions,
            weights,
        })
    }

    /// Every point of a sample as an atom of weight 1.
    pub fn from_sample(sample: &PointSample) -> Self {
        Self {
            dim: sample.dim(),
            positions: sample.coords().to_vec(),
            weights: vec![Complex64::new(1.0, 0.0); sample.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> Complex64 {
        self.weights[i]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], Complex64)> {
        self.positions
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// Weight at position `z`, searched up to tolerance `tol`; zero if no
    /// atom matches.
    pub fn weight_at(&self, z: &[f64], tol: f64) -> Complex64 {
        for (p, w) in self.atoms() {
            if dist(p, z) <= tol {
                return w;
            }
        }
        Complex64::new(0.0, 0.0)
    }

    /// Multiply every weight by `f`.
    pub fn scale(&mut self, f: f64) {
        for w in &mut self.weights {
            *w *= f;
        }
    }

    /// Divide every weight by `d` (exact where `w / d` is, unlike
    /// multiplying by a rounded reciprocal).
    pub fn divide(&mut self, d: f64) {
        for w in &mut self.weights {
            *w /= d;
        }
    }

}

/// Structural diagnostics of a finite sample: packing and covering radii
/// plus finite-sample witnesses against FLC and the Meyer property.
#[derive(Clone, Debug)]
pub struct StructureReport {
    /// Half the minimal nearest-neighbour distance; infinite for singletons.
    pub packing_radius: f64,
    /// Maximum distance from an interior grid probe to the nearest sample
    /// point. Grid pitch is a quarter packing radius, so the estimate is
    /// accurate to half a pitch.
    pub covering_radius: f64,
    /// Two distinct difference vectors closer than the FLC tolerance, if any
    /// were found within `|z| <= margin`.
    pub flc_witness: Option<(Vec<f64>, Vec<f64>)>,
    /// Two distinct difference vectors closer than the uniform-discreteness
    /// tolerance, if any.
    pub meyer_witness: Option<(Vec<f64>, Vec<f64>)>,
    /// Matching tolerance in effect when the report was computed.
    pub matching_tolerance: f64,
}

/// Computes packing/covering radii and FLC/Meyer witnesses.
///
/// Only points with `|x| <= radius - margin` are treated as interior for the
/// covering estimate; witnesses are searched among difference vectors with
/// `|z| <= margin`.
pub fn structure_report(sample: &PointSample, margin: f64) -> Result<StructureReport> {
    if sample.is_empty() {
        return Err(Error::Empty("structure_report requires a nonempty sample"));
    }
    if !(margin > 0.0) || margin >= sample.radius() {
        return Err(Error::Degenerate(format!(
            "margin {margin} must lie in (0, radius)"
        )));
    }
    let eps = sample.matching_tolerance();
    let packing = if sample.len() < 2 {
        f64::INFINITY
    } else {
        0.5 * nn_distances(sample.coords(), sample.dim())
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    };

    let covering = covering_radius(sample, margin, packing);

    // Witness search on binned difference vectors within the margin ball.
    let diffs = difference_vectors(sample, margin)?;
    let flc_tol = 1e3 * eps;
    let meyer_tol = if packing.is_finite() {
        (1e-3 * packing).max(flc_tol)
    } else {
        flc_tol
    };
    let flc_witness = close_pair(&diffs, flc_tol);
    let meyer_witness = close_pair(&diffs, meyer_tol);

    Ok(StructureReport {
        packing_radius: packing,
        covering_radius: covering,
        flc_witness,
        meyer_witness,
        matching_tolerance: eps,
    })
}

fn covering_radius(sample: &PointSample, margin: f64, packing: f64) -> f64 {
    let r_in = sample.radius() - margin;
    let pitch = if packing.is_finite() && packing > 0.0 {
        (packing / 4.0).min(r_in / 4.0)
    } else {
        r_in / 64.0
    };
    let dim = sample.dim();
    let grid = CellGrid::build(sample.coords(), dim, (4.0 * pitch).max(packing.min(r_in)));
    let steps = (2.0 * r_in / pitch).floor() as i64;

    let mut max_dist: f64 = 0.0;
    let mut probe = vec![0.0; dim];
    let mut idx = vec![0i64; dim];
    loop {
        for (c, &i) in probe.iter_mut().zip(idx.iter()) {
            *c = -r_in + i as f64 * pitch;
        }
        if sample.region().contains(&probe, r_in) {
            let d = grid.nearest_distance(&probe, sample.coords(), dim);
            if d > max_dist {
                max_dist = d;
            }
        }
        // odometer increment
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == dim {
                return max_dist;
            }
        }
    }
}

fn close_pair(diffs: &WeightedComb, tol: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = diffs.len();
    // Atom lists within the margin ball are small; a sorted sweep on the
    // first coordinate keeps this near-linear.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| lex_cmp(diffs.position(a), diffs.position(b)));
    for i in 0..n {
        for j in (i + 1)..n {
            let a = diffs.position(idx[i]);
            let b = diffs.position(idx[j]);
            if b[0] - a[0] > tol {
                break;
            }
            if dist(a, b) < tol {
                return Some((a.to_vec(), b.to_vec()));
            }
        }
    }
    None
}

/// All distinct difference vectors `z = x - y` with `|z| <= zmax`, weighted
/// by the integer count of realizing ordered pairs. The atom at `z = 0`
/// carries the sample cardinality.
pub fn difference_vectors(sample: &PointSample, zmax: f64) -> Result<WeightedComb> {
    if !(zmax > 0.0) {
        return Err(Error::Degenerate(format!("invalid zmax {zmax}")));
    }
    if zmax > 2.0 * sample.radius() * (1.0 + 1e-12) {
        return Err(Error::OutOfWindow {
            requested: zmax,
            available: 2.0 * sample.radius(),
        });
    }
    let eps = sample.matching_tolerance();
    let dim = sample.dim();
    let coords = sample.coords();
    let grid = CellGrid::build(coords, dim, zmax);

    // Bin differences by rounding each coordinate to the tolerance grid.
    // Accumulate the coordinate sums so the reported atom position is the
    // mean of the contributing differences (exact for exact differences).
    // The cutoff carries a relative slack so pairs at exactly |z| = zmax
    // are kept when rounding pushes the computed difference slightly out.
    // Counting runs over fixed-size point blocks in parallel; the block
    // maps are merged in index order, so results do not depend on the
    // thread count.
    let n = sample.len();
    let zmax_sq = zmax * zmax * (1.0 + 1e-12);
    let block_bins = |range: std::ops::Range<usize>| {
        let mut bins: HashMap<Vec<i64>, (Vec<f64>, u64)> = HashMap::new();
        let mut z = vec![0.0f64; dim];
        let mut key = vec![0i64; dim];
        for i in range {
            let xi = sample.point(i);
            grid.for_neighbors(xi, |j| {
                let xj = &coords[j * dim..(j + 1) * dim];
                let mut s = 0.0;
                for k in 0..dim {
                    z[k] = xi[k] - xj[k];
                    s += z[k] * z[k];
                }
                if s <= zmax_sq {
                    for k in 0..dim {
                        key[k] = (z[k] / eps).round() as i64;
                    }
                    let e = bins
                        .entry(key.clone())
                        .or_insert_with(|| (vec![0.0; dim], 0));
                    for k in 0..dim {
                        e.0[k] += z[k];
                    }
                    e.1 += 1;
                }
            });
        }
        bins
    };

    const BLOCK: usize = 1 << 13;
    let mut bins: HashMap<Vec<i64>, (Vec<f64>, u64)> = HashMap::new();
    if n <= BLOCK {
        bins = block_bins(0..n);
    } else {
        use rayon::prelude::*;
        let maps: Vec<_> = (0..n.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| block_bins(b * BLOCK..((b + 1) * BLOCK).min(n)))
            .collect();
        for m in maps {
            for (key, (sum, cnt)) in m {
                let e = bins.entry(key).or_insert_with(|| (vec![0.0; dim], 0));
                for k in 0..dim {
                    e.0[k] += sum[k];
                }
                e.1 += cnt;
            }
        }
    }

    let mut atoms: Vec<(Vec<f64>, u64)> = bins
        .into_iter()
        .map(|(_, (sum, cnt))| {
            let pos: Vec<f64> = sum.iter().map(|s| s / cnt as f64).collect();
            (pos, cnt)
        })
        .collect();
    atoms.sort_by(|a, b| lex_cmp(&a.0, &b.0));

    // Merge lex-adjacent atoms that straddled a bin boundary.
    let mut merged: Vec<(Vec<f64>, u64)> = Vec::with_capacity(atoms.len());
    for (pos, cnt) in atoms {
        if let Some(last) = merged.last_mut() {
            if dist(&last.0, &pos) <= eps {
                let total = last.1 + cnt;
                for k in 0..dim {
                    last.0[k] = (last.0[k] * last.1 as f64 + pos[k] * cnt as f64) / total as f64;
                }
                last.1 = total;
                continue;
            }
        }
        merged.push((pos, cnt));
    }

    let mut positions = Vec::with_capacity(merged.len() * dim);
    let mut weights = Vec::with_capacity(merged.len());
    for (pos, cnt) in merged {
        positions.extend_from_slice(&pos);
        weights.push(Complex64::new(cnt as f64, 0.0));
    }
    WeightedComb::from_parts(dim, positions, weights)
}

/// Hausdorff distance between the stereographic lifts of two samples.
///
/// Each sample is interpreted as its point list together with the point at
/// infinity; both are lifted to the unit sphere in R^{d+1} by the inverse
/// stereographic projection and compared in the chordal metric.
pub fn hull_distance(s1: &PointSample, s2: &PointSample) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            got: s2.dim(),
        });
    }
    let a = stereo_lift_all(s1);
    let b = stereo_lift_all(s2);
    Ok(hausdorff(&a, &b))
}

fn stereo_lift_all(s: &PointSample) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = s.points().map(stereo_lift).collect();
    // the north pole represents the point at infinity
    let mut north = vec![0.0; s.dim() + 1];
    north[s.dim()] = 1.0;
    out.push(north);
    out
}

/// Inverse stereographic projection from the north pole:
/// `x -> (2x, |x|^2 - 1) / (|x|^2 + 1)`.
pub fn stereo_lift(x: &[f64]) -> Vec<f64> {
    let n2 = norm_sq(x);
    let denom = n2 + 1.0;
    let mut p: Vec<f64> = x.iter().map(|c| 2.0 * c / denom).collect();
    p.push((n2 - 1.0) / denom);
    p
}

fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let one_sided = |from: &[Vec<f64>], to: &[Vec<f64>]| -> f64 {
        from.iter()
            .map(|p| {
                to.iter()
                    .map(|q| dist(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Nearest-neighbour distance of every point, computed with a uniform cell
/// grid and expanding ring search.
pub(crate) fn nn_distances(coords: &[f64], dim: usize) -> Vec<f64> {
    let n = coords.len() / dim;
    if n < 2 {
        return Vec::new();
    }
    // density-based cell size: roughly one point per cell
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in coords.chunks_exact(dim) {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let extent: f64 = (0..dim).map(|k| (hi[k] - lo[k]).max(1e-300)).product();
    let h = (extent / n as f64).powf(1.0 / dim as f64).max(1e-12);
    let grid = CellGrid::build(coords, dim, h);

    (0..n)
        .map(|i| {
            let xi = &coords[i * dim..(i + 1) * dim];
            let mut ring = 1i64;
            loop {
                let mut best = f64::INFINITY;
                grid.for_neighbors_ring(xi, ring, |j| {
                    if j != i {
                        let xj = &coords[j * dim..(j + 1) * dim];
                        let d = dist(xi, xj);
                        if d < best {
                            best = d;
                        }
                    }
                });
                // a hit is only confirmed once the ring fully covers it
                if best <= (ring as f64) * h {
                    return best;
                }
                if best.is_finite() {
                    // expand once more to cover the confirmed radius
                    ring = (best / h).ceil() as i64 + 1;
                    let mut best2 = f64::INFINITY;
                    grid.for_neighbors_ring(xi, ring, |j| {
                        if j != i {
                            let xj = &coords[j * dim..(j + 1) * dim];
                            let d = dist(xi, xj);
                            if d < best2 {
                                best2 = d;
                            }
                        }
                    });
                    return best2;
                }
                ring *= 2;
                if ring > 1 << 40 {
                    return f64::INFINITY;
                }
            }
        })
        .collect()
}

/// Uniform hash grid over cells of size `h`, used for neighbour queries.
pub(crate) struct CellGrid {
    h: f64,
    dim: usize,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl CellGrid {
    pub fn build(coords: &[f64], dim: usize, h: f64) -> Self {
        let h = if h.is_finite() && h > 0.0 { h } else { 1.0 };
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in coords.chunks_exact(dim).enumerate() {
            let key: Vec<i64> = p.iter().map(|c| (c / h).floor() as i64).collect();
            cells.entry(key).or_default().push(i);
        }
        Self { h, dim, cells }
    }

    /// Visits every point index in the 3^d cells around `x`, in ascending
    /// index order per cell and deterministic cell order.
    pub fn for_neighbors(&self, x: &[f64], mut f: impl FnMut(usize)) {
        self.for_neighbors_ring(x, 1, &mut f);
    }

    /// Visits all cells with Chebyshev distance at most `ring` from the cell
    /// of `x`.
    pub fn for_neighbors_ring(&self, x: &[f64], ring: i64, mut f: impl FnMut(usize)) {
        let center: Vec<i64> = x.iter().map(|c| (c / self.h).floor() as i64).collect();
        let mut offset = vec![-ring; self.dim];
        loop {
            let key: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
            if let Some(v) = self.cells.get(&key) {
                for &i in v {
                    f(i);
                }
            }
            let mut k = 0;
            loop {
                offset[k] += 1;
                if offset[k] <= ring {
                    break;
                }
                offset[k] = -ring;
                k += 1;
                if k == self.dim {
                    return;
                }
            }
        }
    }

    pub fn nearest_distance(&self, x: &[f64], coords: &[f64], dim: usize) -> f64 {
        let mut ring = 1i64;
        loop {
            let mut best = f64::INFINITY;
            self.for_neighbors_ring(x, ring, |j| {
                let d = dist(x, &coords[j * dim..(j + 1) * dim]);
                if d < best {
                    best = d;
                }
            });
            if best <= ring as f64 * self.h {
                return best;
            }
            if best.is_finite() {
                let r2 = (best / self.h).ceil() as i64 + 1;
                let mut best2 = f64::INFINITY;
                self.for_neighbors_ring(x, r2, |j| {
                    let d = dist(x, &coords[j * dim..(j + 1) * dim]);
                    if d < best2 {
                        best2 = d;
                    }
                });
                return best2;
            }
            ring *= 2;
            if ring > 1 << 40 {
                return f64::INFINITY;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integer_sample(radius: f64) -> PointSample {
        let n = radius.floor() as i64;
        let coords: Vec<f64> = (-n..=n).map(|i| i as f64).collect();
        PointSample::new(1, radius, coords, "integers").unwrap()
    }

    fn motif_third_sample(radius: f64) -> PointSample {
        let n = radius.floor() as i64 + 1;
        let mut coords = Vec::new();
        for i in -n..=n {
            for s in [0.0, 1.0 / 3.0] {
                let x = i as f64 + s;
                if x.abs() <= radius {
                    coords.push(x);
                }
            }
        }
        coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
        PointSample::new(1, radius, coords, "integers+third").unwrap()
    }

    #[test]
    fn restrict_integer_lattice() {
        let s = integer_sample(5.0);
        let r = s.restrict(2.5).unwrap();
        let pts: Vec<f64> = r.coords().to_vec();
        assert_eq!(pts, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(r.radius(), 2.5);
        assert_eq!(r.provenance(), "integers");
    }

    #[test]
    fn restrict_to_own_radius_is_identity() {
        let s = motif_third_sample(4.0);
        let r = s.restrict(4.0).unwrap();
        assert_eq!(r.coords(), s.coords());
    }

    #[test]
    fn restrict_beyond_radius_fails() {
        let s = integer_sample(3.0);
        assert!(matches!(s.restrict(4.0), Err(Error::OutOfWindow { .. })));
    }

    #[test]
    fn restrict_composes_as_min() {
        let s = motif_third_sample(9.0);
        let a = s.restrict(7.0).unwrap().restrict(3.0).unwrap();
        let b = s.restrict(3.0).unwrap();
        assert_eq!(a.coords(), b.coords());
    }

    #[test]
    fn structure_report_integer_lattice() {
        let s = integer_sample(20.0);
        let rep = structure_report(&s, 5.0).unwrap();
        assert!((rep.packing_radius - 0.5).abs() < 1e-12);
        assert!((rep.covering_radius - 0.5).abs() < 1e-12);
        assert!(rep.flc_witness.is_none());
        assert!(rep.meyer_witness.is_none());
    }

    #[test]
    fn structure_report_motif_minimal_gap() {
        let s = motif_third_sample(20.0);
        let rep = structure_report(&s, 5.0).unwrap();
        assert!((rep.packing_radius - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn structure_report_rejects_empty() {
        let s = PointSample::new(1, 1.0, vec![], "empty").unwrap();
        assert!(matches!(
            structure_report(&s, 0.5),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn structure_report_witnesses_near_coincident_differences() {
        // differences 1 and 1 + 1e-8 are distinct atoms but closer than the
        // witness tolerance, which flags the accumulation
        let s = PointSample::new(1, 5.0, vec![0.0, 1.0, 2.0 + 1e-8], "crafted").unwrap();
        let rep = structure_report(&s, 2.0).unwrap();
        assert!(rep.flc_witness.is_some());
    }

    #[test]
    fn difference_vector_counts_integer_lattice() {
        let s = integer_sample(2.5);
        let d = difference_vectors(&s, 1.5).unwrap();
        let eps = 1e-9;
        assert_eq!(d.weight_at(&[0.0], eps).re, 5.0);
        assert_eq!(d.weight_at(&[1.0], eps).re, 4.0);
        assert_eq!(d.weight_at(&[-1.0], eps).re, 4.0);
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn difference_vectors_singleton() {
        let s = PointSample::new(1, 1.0, vec![0.0], "singleton").unwrap();
        let d = difference_vectors(&s, 1.0).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.weight_at(&[0.0], 1e-9).re, 1.0);
    }

    #[test]
    fn difference_vectors_centrally_symmetric() {
        let s = motif_third_sample(30.0);
        let d = difference_vectors(&s, 10.0).unwrap();
        let eps = s.matching_tolerance().max(1e-9);
        for (z, w) in d.atoms() {
            let neg: Vec<f64> = z.iter().map(|c| -c).collect();
            let wn = d.weight_at(&neg, eps * 10.0);
            assert_eq!(w.re, wn.re, "count mismatch at z = {z:?}");
        }
    }

    #[test]
    fn hull_distance_identity_and_symmetry() {
        let s = integer_sample(10.0);
        let t = motif_third_sample(10.0);
        assert_eq!(hull_distance(&s, &s).unwrap(), 0.0);
        let ab = hull_distance(&s, &t).unwrap();
        let ba = hull_distance(&t, &s).unwrap();
        assert_eq!(ab, ba);
        assert!(ab > 0.0);
    }

    #[test]
    fn hull_distance_matches_independent_oracle() {
        // recompute the projected all-pairs Hausdorff distance from
        // scratch for the lattice against its half shift
        let s = integer_sample(10.0);
        let coords: Vec<f64> = s.coords().iter().map(|x| x + 0.5).collect();
        let t = PointSample::new(1, 10.5, coords, "integers+half").unwrap();
        let got = hull_distance(&s, &t).unwrap();

        let lift = |x: f64| -> [f64; 2] {
            let n2 = x * x;
            [2.0 * x / (n2 + 1.0), (n2 - 1.0) / (n2 + 1.0)]
        };
        let mut a: Vec<[f64; 2]> = s.coords().iter().map(|&x| lift(x)).collect();
        let mut b: Vec<[f64; 2]> = t.coords().iter().map(|&x| lift(x)).collect();
        a.push([0.0, 1.0]);
        b.push([0.0, 1.0]);
        let one_sided = |from: &[[f64; 2]], to: &[[f64; 2]]| -> f64 {
            from.iter()
                .map(|p| {
                    to.iter()
                        .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        let want = one_sided(&a, &b).max(one_sided(&b, &a));
        assert!(got > 0.0);
        assert!((got - want).abs() < 1e-15, "{got} vs oracle {want}");
    }

    #[test]
    fn hull_distance_decreases_with_translation() {
        let s = integer_sample(50.0);
        let mut last = f64::INFINITY;
        for t in [0.1, 0.01, 0.001] {
            let coords: Vec<f64> = s.coords().iter().map(|x| x + t).collect();
            let shifted = PointSample::new(1, 51.0, coords, "shifted").unwrap();
            let d = hull_distance(&s, &shifted).unwrap();
            assert!(d < last, "expected monotone decrease, got {d} after {last}");
            last = d;
        }
    }

    #[test]
    fn hull_distance_dimension_mismatch() {
        let s = integer_sample(2.0);
        let t = PointSample::new(2, 2.0, vec![0.0, 0.0], "2d").unwrap();
        assert!(matches!(
            hull_distance(&s, &t),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sample_rejects_near_coincident_points() {
        let r = PointSample::new(1, 2.0, vec![0.0, 1e-12, 1.0], "bad");
        assert!(r.is_err());
    }

    #[test]
    fn box_region_volume_and_membership() {
        let s = PointSample::new_box(2, 1.0, vec![0.9, 0.9], "corner").unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.volume() - 4.0).abs() < 1e-12);
        // the corner point lies outside the inscribed ball
        assert!(PointSample::new(2, 1.0, vec![0.9, 0.9], "corner").is_err());
    }
}
