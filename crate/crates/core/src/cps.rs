//! Cut-and-project schemes and model sets.
//!
//! A model set is the physical projection of those lattice points of a
//! higher-dimensional lattice whose internal projection falls into a compact
//! window. Enumeration walks the integer coordinates with per-level interval
//! propagation, so only a thin shell around the admissible region is ever
//! visited; slabs of the leading coordinate run in parallel and the result
//! is merged in lexicographic order of the physical coordinates.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ball_volume, norm_sq};
use crate::pointset::{PointSample, Region};

/// Default genericity tolerance: configurations are rejected when a lattice
/// star image comes this close to the window boundary, since singular window
/// positions break the unique-ergodicity assumptions the tests rely on.
pub const GENERICITY_TOL: f64 = 1e-9;

/// A compact window in internal space.
///
/// The boundary convention is half-open per face: a face is included exactly
/// when its outward normal is lexicographically negative ("include min-face,
/// exclude max-face"), which makes translates of the window tile without
/// double counting.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Window {
    /// Half-open interval `[lo, hi)`; empty when `hi <= lo`.
    Interval { lo: f64, hi: f64 },
    /// Convex polygon, vertices in counterclockwise order.
    Polygon { vertices: Vec<[f64; 2]> },
    /// Regular octagon centered at the origin with the given circumradius,
    /// vertices at odd multiples of π/8.
    Octagon { circumradius: f64 },
}

/// A face constraint `x·normal <= offset`, with the half-open flag saying
/// whether boundary points belong to the window.
#[derive(Clone, Debug)]
struct Face {
    normal: Vec<f64>,
    offset: f64,
    include: bool,
}

fn lex_negative(v: &[f64]) -> bool {
    for &c in v {
        if c < 0.0 {
            return true;
        }
        if c > 0.0 {
            return false;
        }
    }
    false
}

impl Window {
    pub fn dim(&self) -> usize {
        match self {
            Window::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Window::Interval { lo, hi } => hi <= lo,
            Window::Polygon { vertices } => vertices.len() < 3,
            Window::Octagon { circumradius } => *circumradius <= 0.0,
        }
    }

    /// Lebesgue volume of the window.
    pub fn volume(&self) -> f64 {
        match self {
            Window::Interval { lo, hi } => (hi - lo).max(0.0),
            Window::Polygon { vertices } => shoelace(vertices).abs(),
            Window::Octagon { circumradius } => {
                shoelace(&octagon_vertices(*circumradius)).abs()
            }
        }
    }

    /// Axis-aligned bounding box, one `(lo, hi)` pair per coordinate.
    pub fn bbox(&self) -> Vec<(f64, f64)> {
        match self {
            Window::Interval { lo, hi } => vec![(*lo, *hi)],
            Window::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                vec![(lo[0], hi[0]), (lo[1], hi[1])]
            }
            Window::Octagon { circumradius } => {
                let v = octagon_vertices(*circumradius);
                Window::Polygon { vertices: v }.bbox()
            }
        }
    }

    fn faces(&self) -> Result<Vec<Face>> {
        match self {
            Window::Interval { lo, hi } => Ok(vec![
                Face {
                    normal: vec![-1.0],
                    offset: -lo,
                    include: true,
                },
                Face {
                    normal: vec![1.0],
                    offset: *hi,
                    include: false,
                },
            ]),
            Window::Polygon { vertices } => polygon_faces(vertices),
            Window::Octagon { circumradius } => {
                polygon_faces(&octagon_vertices(*circumradius))
            }
        }
    }

    /// Signed distance to the nearest face hyperplane (negative inside).
    fn validate(&self) -> Result<()> {
        match self {
            Window::Interval { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::Degenerate("window bounds must be finite".into()));
                }
                Ok(())
            }
            Window::Polygon { vertices } => {
                polygon_faces(vertices)?;
                Ok(())
            }
            Window::Octagon { circumradius } => {
                if !(*circumradius > 0.0) {
                    return Err(Error::Degenerate("octagon circumradius must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

fn octagon_vertices(circumradius: f64) -> Vec<[f64; 2]> {
    (0..8)
        .map(|k| {
            let phi = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / 8.0;
            [circumradius * phi.cos(), circumradius * phi.sin()]
        })
        .collect()
}

fn shoelace(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        s += v[i][0] * v[j][1] - v[j][0] * v[i][1];
    }
    0.5 * s
}

fn polygon_faces(vertices: &[[f64; 2]]) -> Result<Vec<Face>> {
    if vertices.len() < 3 {
        return Err(Error::Degenerate("polygon needs at least 3 vertices".into()));
    }
    if shoelace(vertices) <= 0.0 {
        return Err(Error::Degenerate(
            "polygon vertices must be in counterclockwise order with positive area".into(),
        ));
    }
    let n = vertices.len();
    let mut faces = Vec::with_capacity(n);
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let edge = [b[0] - a[0], b[1] - a[1]];
        let len = (edge[0] * edge[0] + edge[1] * edge[1]).sqrt();
        if len == 0.0 {
            return Err(Error::Degenerate("degenerate polygon edge".into()));
        }
        // outward normal for a counterclockwise polygon
        let normal = vec![edge[1] / len, -edge[0] / len];
        let offset = normal[0] * a[0] + normal[1] * a[1];
        let include = lex_negative(&normal);
        faces.push(Face {
            normal,
            offset,
            include,
        });
    }
    // convexity: every vertex satisfies every face constraint
    for v in vertices {
        for f in &faces {
            if v[0] * f.normal[0] + v[1] * f.normal[1] > f.offset + 1e-9 {
                return Err(Error::Degenerate("polygon is not convex".into()));
            }
        }
    }
    Ok(faces)
}

/// A cut-and-project scheme: a full lattice in R^{d+m} together with the
/// physical and internal projections.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutProjectScheme {
    pub d_phys: usize,
    pub d_int: usize,
    /// Basis vectors (rows) of the embedding lattice.
    pub basis: Vec<Vec<f64>>,
    /// Physical projection, `d_phys` rows of length `d_phys + d_int`.
    pub proj_phys: Vec<Vec<f64>>,
    /// Internal projection, `d_int` rows.
    pub proj_int: Vec<Vec<f64>>,
}

impl CutProjectScheme {
    pub fn total_dim(&self) -> usize {
        self.d_phys + self.d_int
    }

    fn validate(&self) -> Result<()> {
        let d = self.total_dim();
        if self.d_phys == 0 || self.d_int == 0 {
            return Err(Error::Degenerate("both spaces must have positive dimension".into()));
        }
        let ok_rows = |rows: &Vec<Vec<f64>>, n: usize| {
            rows.len() == n && rows.iter().all(|r| r.len() == d)
        };
        if !ok_rows(&self.basis, d)
            || !ok_rows(&self.proj_phys, self.d_phys)
            || !ok_rows(&self.proj_int, self.d_int)
        {
            return Err(Error::ShapeMismatch("projection/basis shapes are inconsistent".into()));
        }
        if self.embedding_matrix().determinant().abs() < 1e-300 {
            return Err(Error::SingularBasis);
        }
        Ok(())
    }

    /// Row `r` of this matrix maps integer coordinates to the `r`-th output
    /// coordinate: first the physical, then the internal components.
    fn embedding_matrix(&self) -> DMatrix<f64> {
        let d = self.total_dim();
        let b = DMatrix::from_fn(d, d, |i, j| self.basis[i][j]);
        let mut p = DMatrix::zeros(d, d);
        for (r, row) in self.proj_phys.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                p[(r, c)] = v;
            }
        }
        for (r, row) in self.proj_int.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                p[(self.d_phys + r, c)] = v;
            }
        }
        p * b.transpose()
    }

    /// Physical image of the lattice point with integer coordinates `n`.
    pub fn physical(&self, n: &[i64]) -> Vec<f64> {
        let m = self.embedding_matrix();
        (0..self.d_phys)
            .map(|r| (0..self.total_dim()).map(|j| m[(r, j)] * n[j] as f64).sum())
            .collect()
    }

    /// Internal (star map) image of the lattice point with integer
    /// coordinates `n`.
    pub fn star(&self, n: &[i64]) -> Vec<f64> {
        let m = self.embedding_matrix();
        (0..self.d_int)
            .map(|r| {
                (0..self.total_dim())
                    .map(|j| m[(self.d_phys + r, j)] * n[j] as f64)
                    .sum()
            })
            .collect()
    }

    /// Candidate Bragg positions: physical projections of the dual lattice
    /// of the embedding lattice, truncated by `|k_phys| <= kmax` and an
    /// internal bound (amplitudes decay with the internal component).
    /// Returns `(k_phys, k_int)` pairs sorted by physical norm.
    pub fn dual_candidates(&self, kmax: f64, internal_bound: f64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.validate()?;
        let m = self.embedding_matrix();
        let dual = m
            .transpose()
            .try_inverse()
            .ok_or(Error::SingularBasis)?;
        let d = self.total_dim();
        let mut bounds = Vec::with_capacity(d);
        for r in 0..self.d_phys {
            let _ = r;
            bounds.push((-kmax, kmax));
        }
        for _ in 0..self.d_int {
            bounds.push((-internal_bound, internal_bound));
        }
        let ints = lattice_points_in_box(&dual, &bounds);
        let mut out = Vec::new();
        for n in ints {
            let u: Vec<f64> = (0..d)
                .map(|r| (0..d).map(|j| dual[(r, j)] * n[j] as f64).sum())
                .collect();
            let (kp, ki) = u.split_at(self.d_phys);
            if norm_sq(kp) <= kmax * kmax && norm_sq(ki) <= internal_bound * internal_bound {
                out.push((kp.to_vec(), ki.to_vec()));
            }
        }
        out.sort_by(|a, b| {
            norm_sq(&a.0)
                .partial_cmp(&norm_sq(&b.0))
                .unwrap()
                .then_with(|| crate::pointset::lex_cmp(&a.0, &b.0))
        });
        Ok(out)
    }
}

/// A model set specification: scheme, window and a generic internal shift.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSetSpec {
    #[serde(flatten)]
    pub scheme: CutProjectScheme,
    pub window: Window,
    pub shift: Vec<f64>,
    #[serde(default = "default_genericity")]
    pub genericity_tol: f64,
}

fn default_genericity() -> f64 {
    GENERICITY_TOL
}

impl ModelSetSpec {
    pub fn new(scheme: CutProjectScheme, window: Window, shift: Vec<f64>) -> Result<Self> {
        let spec = Self {
            scheme,
            window,
            shift,
            genericity_tol: GENERICITY_TOL,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        self.window.validate()?;
        if self.window.dim() != self.scheme.d_int {
            return Err(Error::DimensionMismatch {
                expected: self.scheme.d_int,
                got: self.window.dim(),
            });
        }
        if self.shift.len() != self.scheme.d_int {
            return Err(Error::DimensionMismatch {
                expected: self.scheme.d_int,
                got: self.shift.len(),
            });
        }
        Ok(())
    }

    /// Built-in presets: `"fibonacci-cps"` and `"ammann-beenker"`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fibonacci-cps" => {
                let tau = (1.0 + 5.0f64.sqrt()) / 2.0;
                ModelSetSpec::new(
                    CutProjectScheme {
                        d_phys: 1,
                        d_int: 1,
                        basis: vec![vec![tau, 1.0 - tau], vec![1.0, 1.0]],
                        proj_phys: vec![vec![1.0, 0.0]],
                        proj_int: vec![vec![0.0, 1.0]],
                    },
                    Window::Interval { lo: 0.0, hi: tau },
                    // generic offset, rationally independent of Z[τ]
                    vec![2.0f64.sqrt() / 3.0],
                )
            }
            "ammann-beenker" => {
                let c = std::f64::consts::FRAC_1_SQRT_2;
                // scale so the shortest distance between vertices is 1
                let s = 0.5 / (std::f64::consts::PI / 8.0).sin();
                let inradius = (1.0 + 2.0f64.sqrt()) / 2.0;
                let circumradius = inradius / (std::f64::consts::PI / 8.0).cos();
                ModelSetSpec::new(
                    CutProjectScheme {
                        d_phys: 2,
                        d_int: 2,
                        basis: vec![
                            vec![1.0, 0.0, 0.0, 0.0],
                            vec![0.0, 1.0, 0.0, 0.0],
                            vec![0.0, 0.0, 1.0, 0.0],
                            vec![0.0, 0.0, 0.0, 1.0],
                        ],
                        // the 8th roots of unity, and their cubes internally
                        proj_phys: vec![
                            vec![s, s * c, 0.0, -s * c],
                            vec![0.0, s * c, s, s * c],
                        ],
                        proj_int: vec![
                            vec![1.0, -c, 0.0, c],
                            vec![0.0, c, -1.0, c],
                        ],
                    },
                    Window::Octagon { circumradius },
                    vec![0.1 / std::f64::consts::PI, 0.1 / std::f64::consts::E],
                )
            }
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

/// All points of the model set with `|x| <= radius`.
///
/// Rejects configurations where a star image falls within the genericity
/// tolerance of the window boundary.
pub fn model_set_sample(spec: &ModelSetSpec, radius: f64) -> Result<PointSample> {
    model_set_sample_named(spec, radius, "model-set")
}

pub fn model_set_sample_named(
    spec: &ModelSetSpec,
    radius: f64,
    provenance: &str,
) -> Result<PointSample> {
    spec.validate()?;
    if !(radius > 0.0) {
        return Err(Error::Degenerate(format!("invalid radius {radius}")));
    }
    if spec.window.is_empty() {
        return PointSample::from_generator(
            spec.scheme.d_phys,
            radius,
            Region::Ball,
            Vec::new(),
            provenance,
        );
    }

    let d = spec.scheme.total_dim();
    let dp = spec.scheme.d_phys;
    let m = spec.scheme.embedding_matrix();
    let faces = spec.window.faces()?;
    let tol = spec.genericity_tol;

    // Constraint box: physical coordinates within [-R, R], internal within
    // the window bounding box (shift removed), inflated by the genericity
    // tolerance so near-boundary candidates are still inspected.
    let mut bounds = Vec::with_capacity(d);
    for _ in 0..dp {
        bounds.push((-radius, radius));
    }
    for (i, (lo, hi)) in spec.window.bbox().into_iter().enumerate() {
        bounds.push((lo - spec.shift[i] - tol, hi - spec.shift[i] + tol));
    }

    let ints = lattice_points_in_box(&m, &bounds);
    let r_sq = radius * radius * (1.0 + 1e-14);

    struct SlabResult {
        coords: Vec<f64>,
        min_boundary: f64,
        worst_point: Vec<f64>,
    }

    let results: Vec<SlabResult> = ints
        .par_chunks(4096.max(ints.len() / 64 + 1))
        .map(|chunk| {
            let mut coords = Vec::new();
            let mut min_boundary = f64::INFINITY;
            let mut worst_point = Vec::new();
            for n in chunk {
                let x: Vec<f64> = (0..dp)
                    .map(|r| (0..d).map(|j| m[(r, j)] * n[j] as f64).sum())
                    .collect();
                if norm_sq(&x) > r_sq {
                    continue;
                }
                let y: Vec<f64> = (0..spec.scheme.d_int)
                    .map(|r| {
                        spec.shift[r]
                            + (0..d).map(|j| m[(dp + r, j)] * n[j] as f64).sum::<f64>()
                    })
                    .collect();
                let mut inside = true;
                let mut nearest = f64::INFINITY;
                for f in &faces {
                    let sd = crate::numeric::dot(&y, &f.normal) - f.offset;
                    nearest = nearest.min(sd.abs());
                    let face_ok = if f.include { sd <= 0.0 } else { sd < 0.0 };
                    if !face_ok {
                        inside = false;
                    }
                }
                if nearest < min_boundary {
                    min_boundary = nearest;
                    worst_point = y.clone();
                }
                if inside {
                    coords.extend_from_slice(&x);
                }
            }
            SlabResult {
                coords,
                min_boundary,
                worst_point,
            }
        })
        .collect();

    let mut coords = Vec::new();
    let mut min_boundary = f64::INFINITY;
    let mut worst_point = Vec::new();
    for r in results {
        coords.extend_from_slice(&r.coords);
        if r.min_boundary < min_boundary {
            min_boundary = r.min_boundary;
            worst_point = r.worst_point;
        }
    }
    if min_boundary < tol {
        return Err(Error::BoundaryHit {
            point: worst_point,
            distance: min_boundary,
        });
    }

    let mut out =
        PointSample::from_generator(dp, radius, Region::Ball, coords, provenance)?;
    out.sort_lex();
    Ok(out)
}

/// Empirical density `card(sample) / vol(B_R)`.
pub fn model_set_density(spec: &ModelSetSpec, radius: f64) -> Result<f64> {
    let s = model_set_sample(spec, radius)?;
    Ok(s.len() as f64 / ball_volume(spec.scheme.d_phys, radius))
}

/// Integer vectors `n` with `(M n)_r` inside `bounds[r]` for every row `r`.
///
/// Enumerates coordinate by coordinate; at each level the feasible interval
/// of the next coordinate is derived from the rows by interval propagation,
/// so runtime is proportional to the admissible shell rather than the full
/// bounding box. The first level is processed in parallel slabs; output
/// order is the lexicographic order of `n` regardless of thread count.
pub fn lattice_points_in_box(m: &DMatrix<f64>, bounds: &[(f64, f64)]) -> Vec<Vec<i64>> {
    let d = bounds.len();
    assert_eq!(m.nrows(), d);
    assert_eq!(m.ncols(), d);

    // global per-coordinate ranges from the inverse image of the box
    let inv = match m.clone().try_inverse() {
        Some(inv) => inv,
        None => return Vec::new(),
    };
    let mut lo = vec![0.0f64; d];
    let mut hi = vec![0.0f64; d];
    for i in 0..d {
        for j in 0..d {
            let a = inv[(i, j)] * bounds[j].0;
            let b = inv[(i, j)] * bounds[j].1;
            lo[i] += a.min(b);
            hi[i] += a.max(b);
        }
    }
    // slack grows with the magnitude so accumulated rounding in the row
    // sums can only add candidates, never drop admissible ones; the exact
    // per-point tests filter the extras
    let slack = |x: f64| 1e-9 * (1.0 + x.abs());
    let range: Vec<(i64, i64)> = (0..d)
        .map(|i| {
            (
                (lo[i] - slack(lo[i])).ceil() as i64 - 1,
                (hi[i] + slack(hi[i])).floor() as i64 + 1,
            )
        })
        .collect();

    // residual interval of sum_{j >= k} m[r][j] * n_j per row and level
    let mut rest_lo = vec![vec![0.0f64; d]; d + 1];
    let mut rest_hi = vec![vec![0.0f64; d]; d + 1];
    for k in (0..d).rev() {
        for r in 0..d {
            let a = m[(r, k)] * range[k].0 as f64;
            let b = m[(r, k)] * range[k].1 as f64;
            rest_lo[k][r] = rest_lo[k + 1][r] + a.min(b);
            rest_hi[k][r] = rest_hi[k + 1][r] + a.max(b);
        }
    }

    fn descend(
        m: &DMatrix<f64>,
        bounds: &[(f64, f64)],
        range: &[(i64, i64)],
        rest_lo: &[Vec<f64>],
        rest_hi: &[Vec<f64>],
        level: usize,
        partial: &mut Vec<i64>,
        sums: &mut Vec<f64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        let d = bounds.len();
        if level == d {
            out.push(partial.clone());
            return;
        }
        // feasible interval of n_level from every row
        let mut lo = range[level].0 as f64;
        let mut hi = range[level].1 as f64;
        for r in 0..d {
            let c = m[(r, level)];
            if c.abs() < 1e-300 {
                continue;
            }
            let slack_lo = rest_lo[level + 1][r];
            let slack_hi = rest_hi[level + 1][r];
            let a = (bounds[r].0 - sums[r] - slack_hi) / c;
            let b = (bounds[r].1 - sums[r] - slack_lo) / c;
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        let n_lo = (lo - 1e-9 * (1.0 + lo.abs())).ceil() as i64;
        let n_hi = (hi + 1e-9 * (1.0 + hi.abs())).floor() as i64;
        for n in n_lo..=n_hi {
            partial.push(n);
            for r in 0..d {
                sums[r] += m[(r, level)] * n as f64;
            }
            descend(m, bounds, range, rest_lo, rest_hi, level + 1, partial, sums, out);
            for r in 0..d {
                sums[r] -= m[(r, level)] * n as f64;
            }
            partial.pop();
        }
    }

    if d == 1 {
        let mut out = Vec::new();
        let mut partial = Vec::new();
        let mut sums = vec![0.0; 1];
        descend(m, bounds, &range, &rest_lo, &rest_hi, 0, &mut partial, &mut sums, &mut out);
        return out;
    }

    // parallel slabs over the leading coordinate
    let (a0, b0) = range[0];
    let slabs: Vec<i64> = (a0..=b0).collect();
    let chunks: Vec<Vec<Vec<i64>>> = slabs
        .par_iter()
        .map(|&n0| {
            let mut out = Vec::new();
            let mut partial = vec![n0];
            let mut sums: Vec<f64> = (0..bounds.len()).map(|r| m[(r, 0)] * n0 as f64).collect();
            // level-0 feasibility is re-checked inside level 1 bounds
            descend(
                m, bounds, &range, &rest_lo, &rest_hi, 1, &mut partial, &mut sums, &mut out,
            );
            out
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{difference_vectors, structure_report};

    const TAU: f64 = 1.618033988749894848204586834365638118;

    #[test]
    fn fibonacci_gaps_take_two_values() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let s = model_set_sample(&spec, 1000.0).unwrap();
        assert!(s.len() > 1000);
        let mut gaps: Vec<f64> = s
            .coords()
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect();
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let short = gaps[0];
        let long = gaps[gaps.len() - 1];
        assert!((short - 1.0).abs() < 1e-9, "short gap {short}");
        assert!((long - TAU).abs() < 1e-9, "long gap {long}");
        for g in gaps {
            assert!(
                (g - 1.0).abs() < 1e-9 || (g - TAU).abs() < 1e-9,
                "unexpected gap {g}"
            );
        }
    }

    #[test]
    fn fibonacci_restricted_count_tracks_density() {
        // density oracle from direct enumeration at the full radius
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let s = model_set_sample(&spec, 500.0).unwrap();
        let dens = s.len() as f64 / 1000.0;
        let r = 100.0;
        let inner = s.restrict(r).unwrap();
        let expected = dens * 2.0 * r;
        assert!(
            (inner.len() as f64 - expected).abs() / expected < 0.05,
            "count {} vs density estimate {expected}",
            inner.len()
        );
    }

    #[test]
    fn fibonacci_density_consistent_across_scales() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let d1 = model_set_density(&spec, 1e3).unwrap();
        let d2 = model_set_density(&spec, 1e4).unwrap();
        assert!(
            (d1 - d2).abs() / d2 < 0.005,
            "densities {d1} vs {d2} disagree beyond 0.5%"
        );
    }

    #[test]
    fn doubling_window_doubles_density() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let mut wide = spec.clone();
        wide.window = Window::Interval {
            lo: 0.0,
            hi: 2.0 * TAU,
        };
        let d1 = model_set_density(&spec, 2e3).unwrap();
        let d2 = model_set_density(&wide, 2e3).unwrap();
        assert!(
            (d2 - 2.0 * d1).abs() / (2.0 * d1) < 0.01,
            "expected doubling, got {d1} -> {d2}"
        );
    }

    #[test]
    fn empty_window_gives_empty_sample() {
        let mut spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        spec.window = Window::Interval { lo: 0.5, hi: 0.5 };
        let s = model_set_sample(&spec, 100.0).unwrap();
        assert!(s.is_empty());
        assert_eq!(model_set_density(&spec, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn star_map_is_linear_and_matches_preset_basis() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        assert_eq!(spec.scheme.star(&[0, 0]), vec![0.0]);
        let phys = spec.scheme.physical(&[1, 0]);
        let star = spec.scheme.star(&[1, 0]);
        assert!((phys[0] - TAU).abs() < 1e-12);
        assert!((star[0] - (1.0 - TAU)).abs() < 1e-12);
        // additivity
        let u = [3, -2];
        let v = [-1, 4];
        let sum = [u[0] + v[0], u[1] + v[1]];
        let su = spec.scheme.star(&u);
        let sv = spec.scheme.star(&v);
        let ss = spec.scheme.star(&sum);
        assert!((su[0] + sv[0] - ss[0]).abs() < 1e-12);
    }

    #[test]
    fn fibonacci_sample_is_delone() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let s = model_set_sample(&spec, 300.0).unwrap();
        let rep = structure_report(&s, 20.0).unwrap();
        assert!((rep.packing_radius - 0.5).abs() < 1e-9);
        assert!((rep.covering_radius - TAU / 2.0).abs() < 0.07);
        assert!(rep.packing_radius > 0.0);
        assert!(rep.covering_radius.is_finite());
        assert!(rep.flc_witness.is_none());
        assert!(rep.meyer_witness.is_none());
    }

    #[test]
    fn meyer_difference_containment() {
        // difference vectors of the sample lie in the model set with
        // window W - W (inflated slightly: W - W has a lattice star image
        // exactly on its boundary)
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let s = model_set_sample(&spec, 500.0).unwrap();
        let diffs = difference_vectors(&s, 30.0).unwrap();

        let mut diff_spec = spec.clone();
        diff_spec.window = Window::Interval {
            lo: -TAU - 1e-6,
            hi: TAU + 1e-6,
        };
        diff_spec.shift = vec![0.0];
        let diff_set = model_set_sample(&diff_spec, 31.0).unwrap();

        for (z, _) in diffs.atoms() {
            let hit = diff_set
                .points()
                .any(|p| (p[0] - z[0]).abs() < 1e-6);
            assert!(hit, "difference vector {z:?} not in the W-W model set");
        }
    }

    #[test]
    fn enumeration_is_consistent_across_radii() {
        // restricting a large-radius enumeration must reproduce the
        // direct enumeration at the smaller radius point for point
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let big = model_set_sample(&spec, 1e4).unwrap();
        let small = model_set_sample(&spec, 5e3).unwrap();
        let restricted = big.restrict(5e3).unwrap();
        assert_eq!(restricted.len(), small.len());
        assert_eq!(restricted.coords(), small.coords());
    }

    #[test]
    fn nested_windows_give_nested_point_sets() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let mut narrow = spec.clone();
        narrow.window = Window::Interval { lo: 0.0, hi: 1.0 };
        let small = model_set_sample(&narrow, 500.0).unwrap();
        let big = model_set_sample(&spec, 500.0).unwrap();
        let mut i = 0;
        for p in small.points() {
            while i < big.len() && big.point(i)[0] < p[0] - 1e-12 {
                i += 1;
            }
            assert!(
                i < big.len() && (big.point(i)[0] - p[0]).abs() < 1e-12,
                "point {p:?} of the narrow sample missing from the wide one"
            );
        }
    }

    #[test]
    fn shifting_by_star_image_translates_physically() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let n = [1i64, -1];
        let t = spec.scheme.physical(&n)[0];
        let star = spec.scheme.star(&n)[0];
        let mut shifted = spec.clone();
        shifted.shift = vec![spec.shift[0] - star];

        let r = 200.0;
        let a = model_set_sample(&spec, r).unwrap();
        let b = model_set_sample(&shifted, r).unwrap();
        // compare on the common interior
        let inner = r - t.abs() - 1.0;
        for p in a.points() {
            let q = p[0] + t;
            if q.abs() <= inner {
                let hit = b.points().any(|x| (x[0] - q).abs() < 1e-9);
                assert!(hit, "translate of {p:?} missing");
            }
        }
    }

    #[test]
    fn genericity_violation_is_rejected() {
        let mut spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        // shift 0 puts the star image of the origin exactly on the
        // included boundary face of [0, τ)
        spec.shift = vec![0.0];
        match model_set_sample(&spec, 50.0) {
            Err(Error::BoundaryHit { distance, .. }) => {
                assert!(distance < spec.genericity_tol);
            }
            other => panic!("expected boundary-hit rejection, got {other:?}"),
        }
    }

    #[test]
    fn ammann_beenker_shortest_distance_is_one() {
        let spec = ModelSetSpec::preset("ammann-beenker").unwrap();
        let s = model_set_sample(&spec, 30.0).unwrap();
        assert!(s.len() > 500);
        let rep = structure_report(&s, 5.0).unwrap();
        assert!(
            (2.0 * rep.packing_radius - 1.0).abs() < 1e-6,
            "shortest distance {}",
            2.0 * rep.packing_radius
        );
    }

    #[test]
    fn ammann_beenker_difference_histogram_is_eightfold() {
        let spec = ModelSetSpec::preset("ammann-beenker").unwrap();
        let s = model_set_sample(&spec, 60.0).unwrap();
        let diffs = difference_vectors(&s, 6.0).unwrap();
        let n0 = s.len() as f64;
        let (cos8, sin8) = {
            let a = std::f64::consts::FRAC_PI_4;
            (a.cos(), a.sin())
        };
        let mut worst: f64 = 0.0;
        for (z, w) in diffs.atoms() {
            let rot = [cos8 * z[0] - sin8 * z[1], sin8 * z[0] + cos8 * z[1]];
            let wr = diffs.weight_at(&rot, 1e-6);
            let dev = (w.re - wr.re).abs() / n0;
            worst = worst.max(dev);
        }
        assert!(worst < 0.02, "eightfold deviation {worst}");
    }

    #[test]
    fn ammann_beenker_is_delone() {
        let spec = ModelSetSpec::preset("ammann-beenker").unwrap();
        let s = model_set_sample(&spec, 25.0).unwrap();
        let rep = structure_report(&s, 4.0).unwrap();
        assert!(rep.packing_radius > 0.0);
        assert!(rep.covering_radius.is_finite());
        assert!(rep.covering_radius >= rep.packing_radius);
    }

    #[test]
    fn dual_candidates_contain_integer_peaks_for_unit_lattice() {
        // degenerate-free sanity check on a product scheme Z x Z
        let spec = ModelSetSpec::new(
            CutProjectScheme {
                d_phys: 1,
                d_int: 1,
                basis: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                proj_phys: vec![vec![1.0, 0.0]],
                proj_int: vec![vec![0.0, 1.0]],
            },
            Window::Interval { lo: -0.4, hi: 0.4 },
            vec![0.01],
        )
        .unwrap();
        let cands = spec.scheme.dual_candidates(3.0, 0.5).unwrap();
        // the dual of Z^2 is Z^2; candidates with small internal part are
        // the integers paired with internal 0
        let phys: Vec<f64> = cands.iter().map(|c| c.0[0]).collect();
        for m in [-3.0f64, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0] {
            assert!(
                phys.iter().any(|p| (p - m).abs() < 1e-12),
                "missing dual candidate {m}"
            );
        }
    }
}
