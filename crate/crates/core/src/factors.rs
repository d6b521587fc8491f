//! Locator sets, derived factors and sliding block maps.
//!
//! The locator set of a cluster pattern `(K, P)` collects the points of a
//! sample whose `K`-neighborhood equals `P`; the resulting point set is the
//! derived-factor image of the sample. Sliding block maps recode a chain
//! letter by letter from `w`-letter windows. Scanning the diffraction of a
//! factor can reveal eigenvalues the source diffraction misses, which is
//! what [`factor_diffraction_gain`] reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffraction::{bragg_scan, BraggList, Source};
use crate::error::{Error, Result};
use crate::generators::ChainSample;
use crate::numeric::{dist, norm};
use crate::pointset::{CellGrid, PointSample};

/// The compact window of a cluster pattern, containing the origin.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PatternWindow {
    /// `[lo, hi]` with `lo <= 0 <= hi`.
    Interval { lo: f64, hi: f64 },
    Ball { radius: f64 },
    Box { halfwidths: Vec<f64> },
}

impl PatternWindow {
    pub fn dim(&self) -> usize {
        match self {
            PatternWindow::Interval { .. } => 1,
            PatternWindow::Ball { .. } => 0, // any
            PatternWindow::Box { halfwidths } => halfwidths.len(),
        }
    }

    /// Radius of the smallest origin-centered ball containing the window.
    pub fn outer_radius(&self) -> f64 {
        match self {
            PatternWindow::Interval { lo, hi } => lo.abs().max(hi.abs()),
            PatternWindow::Ball { radius } => *radius,
            PatternWindow::Box { halfwidths } => norm(halfwidths),
        }
    }

    /// Closed-window membership with tolerance `eps`.
    pub fn contains(&self, z: &[f64], eps: f64) -> bool {
        match self {
            PatternWindow::Interval { lo, hi } => z[0] >= lo - eps && z[0] <= hi + eps,
            PatternWindow::Ball { radius } => norm(z) <= radius + eps,
            PatternWindow::Box { halfwidths } => z
                .iter()
                .zip(halfwidths)
                .all(|(c, h)| c.abs() <= h + eps),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match self {
            PatternWindow::Interval { lo, hi } => dim == 1 && *lo <= 0.0 && *hi >= 0.0 && lo < hi,
            PatternWindow::Ball { radius } => *radius > 0.0,
            PatternWindow::Box { halfwidths } => {
                halfwidths.len() == dim && halfwidths.iter().all(|&h| h > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Degenerate("invalid pattern window".into()))
        }
    }
}

/// A cluster pattern: a compact window `K` around the origin and the finite
/// point set `P ⊂ K` that a neighborhood must equal. By the convention that
/// clusters occur at points of the set, `P` contains the origin.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterPattern {
    #[serde(rename = "K")]
    pub window: PatternWindow,
    #[serde(rename = "P")]
    pub points: Vec<Vec<f64>>,
}

impl ClusterPattern {
    pub fn new(window: PatternWindow, points: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self { window, points };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Empty("the empty set is not a cluster"));
        }
        let dim = self.points[0].len();
        self.window.validate(dim)?;
        if self.points.iter().any(|p| p.len() != dim) {
            return Err(Error::ShapeMismatch("pattern point dimensions differ".into()));
        }
        if !self.points.iter().any(|p| norm(p) < 1e-9) {
            return Err(Error::Degenerate(
                "pattern must contain the origin (clusters occur at points of the set)".into(),
            ));
        }
        for p in &self.points {
            if !self.window.contains(p, 1e-9) {
                return Err(Error::Degenerate(format!(
                    "pattern point {p:?} lies outside the window"
                )));
            }
        }
        Ok(())
    }

    fn sorted_points(&self) -> Vec<Vec<f64>> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| crate::pointset::lex_cmp(a, b));
        pts
    }
}

/// Points `t` of the sample whose `K`-neighborhood `(sample - t) ∩ K`
/// equals the pattern `P` up to the matching tolerance. The output is
/// restricted to `|t| <= radius - outer_radius(K)` so every neighborhood is
/// fully contained in the sample.
pub fn locator_set(sample: &PointSample, pattern: &ClusterPattern) -> Result<PointSample> {
    locator_set_named(sample, pattern, "locator-set")
}

/// [`locator_set`] with derived-factor provenance.
pub fn derived_factor_sample(
    sample: &PointSample,
    pattern: &ClusterPattern,
) -> Result<PointSample> {
    locator_set_named(sample, pattern, "derived-factor")
}

fn locator_set_named(
    sample: &PointSample,
    pattern: &ClusterPattern,
    provenance: &str,
) -> Result<PointSample> {
    pattern.validate()?;
    let dim = sample.dim();
    if !pattern.points.is_empty() && pattern.points[0].len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: pattern.points[0].len(),
        });
    }
    let k_rad = pattern.window.outer_radius();
    let t_max = sample.radius() - k_rad;
    if !(t_max > 0.0) {
        return Err(Error::Degenerate(
            "pattern window larger than the sample".into(),
        ));
    }
    let eps = sample.matching_tolerance();
    let want = pattern.sorted_points();
    let grid = CellGrid::build(sample.coords(), dim, k_rad.max(eps));

    let mut out = Vec::new();
    let mut neighborhood: Vec<Vec<f64>> = Vec::new();
    for i in 0..sample.len() {
        let t = sample.point(i);
        if norm(t) > t_max {
            continue;
        }
        neighborhood.clear();
        grid.for_neighbors(t, |j| {
            let x = sample.point(j);
            let z: Vec<f64> = x.iter().zip(t).map(|(a, b)| a - b).collect();
            if pattern.window.contains(&z, eps) {
                neighborhood.push(z);
            }
        });
        if neighborhood.len() != want.len() {
            continue;
        }
        neighborhood.sort_by(|a, b| crate::pointset::lex_cmp(a, b));
        let matches = neighborhood
            .iter()
            .zip(&want)
            .all(|(a, b)| dist(a, b) <= eps * 10.0);
        if matches {
            out.extend_from_slice(t);
        }
    }
    PointSample::from_generator(
        dim,
        t_max,
        sample.region(),
        out,
        format!("{}:{}", sample.provenance(), provenance),
    )
}

/// A sliding block map: a window length and a total rule from legal
/// `w`-letter words (letter names concatenated) to output letter names.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockMap {
    #[serde(rename = "w")]
    pub width: usize,
    pub rule: BTreeMap<String, String>,
}

impl BlockMap {
    /// The standard difference rule sending a two-letter window to `a`
    /// when the letters differ and to `b` when they agree.
    pub fn difference_rule() -> Self {
        BlockMap {
            width: 2,
            rule: BTreeMap::from([
                ("ab".into(), "a".into()),
                ("ba".into(), "a".into()),
                ("aa".into(), "b".into()),
                ("bb".into(), "b".into()),
            ]),
        }
    }
}

/// Applies a sliding block map to a chain: the letter at endpoint `i` of
/// the output is `rule(w_i ... w_{i+w-1})`; the last `w - 1` tiles are
/// dropped. Endpoints are unchanged.
pub fn sliding_block(chain: &ChainSample, map: &BlockMap) -> Result<ChainSample> {
    if map.width == 0 {
        return Err(Error::Degenerate("block map width must be positive".into()));
    }
    let n = chain.len();
    if n < map.width {
        return Err(Error::Degenerate("chain shorter than the block width".into()));
    }
    let src_names = chain.alphabet();

    // output alphabet in sorted order
    let mut out_names: Vec<String> = map.rule.values().cloned().collect();
    out_names.sort();
    out_names.dedup();

    let m = n - map.width + 1;
    let mut letters = Vec::with_capacity(m);
    let mut endpoints = Vec::with_capacity(m);
    let mut out_lengths: Vec<Option<f64>> = vec![None; out_names.len()];
    for i in 0..m {
        let word: String = (0..map.width)
            .map(|j| src_names[chain.letters()[i + j] as usize].as_str())
            .collect();
        let target = map
            .rule
            .get(&word)
            .ok_or_else(|| Error::IllegalWord(word.clone()))?;
        let idx = out_names.iter().position(|l| l == target).unwrap() as u32;
        // the output tile keeps the source gap; it must be consistent
        // per output letter for the image to be a geometric chain
        let gap = chain.lengths()[chain.letters()[i] as usize];
        match out_lengths[idx as usize] {
            None => out_lengths[idx as usize] = Some(gap),
            Some(l) if (l - gap).abs() <= 1e-9 * l.max(1.0) => {}
            Some(l) => {
                return Err(Error::Degenerate(format!(
                    "output letter {target:?} would carry tile lengths {l} and {gap}"
                )))
            }
        }
        letters.push(idx);
        endpoints.push(chain.sample().point(i)[0]);
    }
    let lengths: Vec<f64> = out_lengths
        .into_iter()
        .map(|l| l.unwrap_or(1.0))
        .collect();
    ChainSample::from_tiles(
        endpoints,
        letters,
        out_names,
        lengths,
        format!("{}+block-map", chain.sample().provenance()),
    )
}

/// Bragg scans of a source and one of its factors over a shared candidate
/// list, with the factor-only detections singled out.
#[derive(Clone, Debug)]
pub struct GainReport {
    pub source_peaks: BraggList,
    pub factor_peaks: BraggList,
    /// Candidates detected in the factor but absent from the source.
    pub gained: Vec<(Vec<f64>, f64)>,
}

/// Scans both inputs at the same candidates and threshold and lists the
/// eigenvalue candidates only the factor detects.
pub fn factor_diffraction_gain(
    source: &Source,
    factor: &Source,
    candidates: &[Vec<f64>],
    threshold: f64,
) -> Result<GainReport> {
    let source_peaks = bragg_scan(source, candidates, threshold)?;
    let factor_peaks = bragg_scan(factor, candidates, threshold)?;
    let tol = 1.0 / (10.0 * source.radius().min(factor.radius()));
    let gained = factor_peaks
        .peaks
        .iter()
        .filter(|p| source_peaks.intensity_at(&p.k, tol).is_none())
        .map(|p| (p.k.clone(), p.intensity))
        .collect();
    Ok(GainReport {
        source_peaks,
        factor_peaks,
        gained,
    })
}
