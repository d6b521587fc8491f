//! Generators for the example point sets: lattices, crystallographic sets
//! `S + Γ`, and geometric realizations of primitive substitution rules.
//!
//! Substitution chains are laid out with tile lengths taken from the left
//! Perron–Frobenius eigenvector of the substitution matrix (scaled so the
//! shortest tile has length 1), which makes the letter-to-interval
//! correspondence of the constant-length rules a special case. Endpoints are
//! computed as exact integer combinations of the tile lengths, not by
//! running sums, so the accumulated rounding error stays below `n * 1e-12`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::norm_sq;
use crate::pointset::{PointSample, Region, WeightedComb};

/// Default cap on the number of generated points; the CLI exposes an
/// override flag.
pub const DEFAULT_POINT_CAP: usize = 10_000_000;

/// A full-rank lattice in R^d, given by its basis vectors (rows).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub basis: Vec<Vec<f64>>,
}

impl LatticeSpec {
    pub fn new(basis: Vec<Vec<f64>>) -> Result<Self> {
        let spec = Self { basis };
        spec.matrix()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn matrix(&self) -> Result<DMatrix<f64>> {
        let d = self.basis.len();
        if d == 0 || self.basis.iter().any(|row| row.len() != d) {
            return Err(Error::ShapeMismatch("basis must be a square matrix".into()));
        }
        let m = DMatrix::from_fn(d, d, |i, j| self.basis[i][j]);
        if m.determinant().abs() < 1e-300 {
            return Err(Error::SingularBasis);
        }
        Ok(m)
    }

    /// `dens(Γ) = 1 / |det basis|`.
    pub fn density(&self) -> Result<f64> {
        Ok(1.0 / self.matrix()?.determinant().abs())
    }

    /// The dual lattice `Γ* = { y | x·y ∈ Z for all x ∈ Γ }`.
    pub fn dual(&self) -> Result<LatticeSpec> {
        let m = self.matrix()?;
        let inv = m.try_inverse().ok_or(Error::SingularBasis)?.transpose();
        let d = self.dim();
        let basis = (0..d)
            .map(|i| (0..d).map(|j| inv[(i, j)]).collect())
            .collect();
        Ok(LatticeSpec { basis })
    }

    /// All lattice points with `|x| <= radius`, found by enumerating the
    /// integer coordinates inside the preimage box of the ball.
    pub fn sample(&self, radius: f64) -> Result<PointSample> {
        let coords = self.points_within(radius)?;
        let mut s =
            PointSample::from_generator(self.dim(), radius, Region::Ball, coords, "lattice")?;
        s.sort_lex();
        Ok(s)
    }

    pub(crate) fn points_within(&self, radius: f64) -> Result<Vec<f64>> {
        if !(radius > 0.0) {
            return Err(Error::Degenerate(format!("invalid radius {radius}")));
        }
        let d = self.dim();
        let m = self.matrix()?;
        let inv = m.try_inverse().ok_or(Error::SingularBasis)?;
        // |n_i| = |x · col_i(B^{-1})| <= R * ||col_i(B^{-1})||
        let bounds: Vec<i64> = (0..d)
            .map(|i| (radius * inv.column(i).norm()).floor() as i64 + 1)
            .collect();
        let r_sq = radius * radius * (1.0 + 1e-14);
        let mut coords = Vec::new();
        let mut n: Vec<i64> = bounds.iter().map(|b| -b).collect();
        let mut x = vec![0.0f64; d];
        loop {
            for (j, xj) in x.iter_mut().enumerate() {
                *xj = (0..d).map(|i| n[i] as f64 * self.basis[i][j]).sum();
            }
            if norm_sq(&x) <= r_sq {
                coords.extend_from_slice(&x);
            }
            let mut k = 0;
            loop {
                n[k] += 1;
                if n[k] <= bounds[k] {
                    break;
                }
                n[k] = -bounds[k];
                k += 1;
                if k == d {
                    return Ok(coords);
                }
            }
        }
    }
}

/// A crystallographic (fully periodic) point set `S + Γ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrystallographicSpec {
    pub lattice: LatticeSpec,
    /// Motif: finitely many points inside a fundamental domain.
    pub motif: Vec<Vec<f64>>,
}

impl CrystallographicSpec {
    pub fn new(lattice: LatticeSpec, motif: Vec<Vec<f64>>) -> Result<Self> {
        let spec = Self { lattice, motif };
        spec.check_motif()?;
        Ok(spec)
    }

    fn check_motif(&self) -> Result<()> {
        let d = self.lattice.dim();
        if self.motif.is_empty() {
            return Err(Error::Empty("motif must be nonempty"));
        }
        if self.motif.iter().any(|s| s.len() != d) {
            return Err(Error::ShapeMismatch("motif dimension mismatch".into()));
        }
        // distinct mod Γ: s_i - s_j must not be a lattice vector
        let m = self.lattice.matrix()?;
        let inv = m.try_inverse().ok_or(Error::SingularBasis)?;
        for i in 0..self.motif.len() {
            for j in (i + 1)..self.motif.len() {
                let diff = DMatrix::from_fn(1, d, |_, k| self.motif[i][k] - self.motif[j][k]);
                let n = &diff * &inv;
                let integral = (0..d).all(|k| (n[(0, k)] - n[(0, k)].round()).abs() < 1e-9);
                if integral {
                    return Err(Error::MotifCollision);
                }
            }
        }
        Ok(())
    }

    pub fn density(&self) -> Result<f64> {
        Ok(self.motif.len() as f64 * self.lattice.density()?)
    }

    /// The Minkowski sum `S + Γ` restricted to the centered ball.
    pub fn sample(&self, radius: f64) -> Result<PointSample> {
        let d = self.lattice.dim();
        let s_max = self
            .motif
            .iter()
            .map(|s| norm_sq(s).sqrt())
            .fold(0.0, f64::max);
        let lattice_pts = self.lattice.points_within(radius + s_max + 1.0)?;
        let r_sq = radius * radius * (1.0 + 1e-14);
        let mut coords = Vec::new();
        for l in lattice_pts.chunks_exact(d) {
            for s in &self.motif {
                let x: Vec<f64> = l.iter().zip(s).map(|(a, b)| a + b).collect();
                if norm_sq(&x) <= r_sq {
                    coords.extend_from_slice(&x);
                }
            }
        }
        let mut out =
            PointSample::from_generator(d, radius, Region::Ball, coords, "crystallographic")?;
        out.sort_lex();
        Ok(out)
    }
}

/// How tile lengths are specified in a substitution config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthsSpec {
    /// `"perron"`: take the left Perron–Frobenius eigenvector, scaled so the
    /// shortest tile is 1.
    Named(String),
    Map(BTreeMap<String, f64>),
}

/// A rule image: either a plain word over single-character letters or an
/// explicit list of letter names.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleWord {
    Word(String),
    Letters(Vec<String>),
}

/// JSON configuration of a substitution system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubstitutionConfig {
    pub alphabet: Vec<String>,
    pub rules: BTreeMap<String, RuleWord>,
    pub lengths: LengthsSpec,
    /// Two-sided seed `"u|v"` around the origin.
    pub seed: String,
}

/// A primitive substitution rule with a geometric realization.
#[derive(Clone, Debug)]
pub struct SubstitutionSystem {
    letters: Vec<String>,
    /// rule image per letter, as indices into `letters`
    rules: Vec<Vec<usize>>,
    /// tile length per letter, min normalized to 1
    lengths: Vec<f64>,
    /// seed pair (left letter, right letter) around the origin
    seed: (usize, usize),
    name: String,
}

impl SubstitutionSystem {
    pub fn from_config(cfg: &SubstitutionConfig, name: impl Into<String>) -> Result<Self> {
        let letters = cfg.alphabet.clone();
        let index: BTreeMap<&str, usize> = letters
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        if index.len() != letters.len() {
            return Err(Error::Degenerate("duplicate letters in alphabet".into()));
        }
        let lookup = |name: &str| -> Result<usize> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownLetter(name.to_string()))
        };

        let mut rules = Vec::with_capacity(letters.len());
        for l in &letters {
            let rw = cfg
                .rules
                .get(l)
                .ok_or_else(|| Error::Config(format!("missing rule for letter {l:?}")))?;
            let image: Vec<usize> = match rw {
                RuleWord::Word(w) => {
                    let single = letters.iter().all(|s| s.chars().count() == 1);
                    if !single {
                        return Err(Error::Config(
                            "string rules need single-character letters; use a letter array"
                                .into(),
                        ));
                    }
                    w.chars()
                        .map(|c| lookup(&c.to_string()))
                        .collect::<Result<_>>()?
                }
                RuleWord::Letters(ls) => ls.iter().map(|s| lookup(s)).collect::<Result<_>>()?,
            };
            if image.is_empty() {
                return Err(Error::Config(format!("empty rule image for {l:?}")));
            }
            rules.push(image);
        }

        let seed = {
            let parts: Vec<&str> = cfg.seed.split('|').collect();
            if parts.len() != 2 {
                return Err(Error::IllegalSeed(format!(
                    "seed must be of the form \"u|v\", got {:?}",
                    cfg.seed
                )));
            }
            (lookup(parts[0])?, lookup(parts[1])?)
        };

        let mut sys = Self {
            letters,
            rules,
            lengths: Vec::new(),
            seed,
            name: name.into(),
        };
        if !sys.is_primitive() {
            return Err(Error::NotPrimitive);
        }
        sys.lengths = match &cfg.lengths {
            LengthsSpec::Named(n) if n == "perron" => sys.perron_lengths(),
            LengthsSpec::Named(n) => {
                return Err(Error::Config(format!(
                    "unknown lengths spec {n:?}; use \"perron\" or an explicit map"
                )))
            }
            LengthsSpec::Map(m) => {
                let mut v = Vec::with_capacity(sys.letters.len());
                for l in &sys.letters {
                    v.push(
                        *m.get(l)
                            .ok_or_else(|| Error::Config(format!("missing length for {l:?}")))?,
                    );
                }
                v
            }
        };
        sys.check_lengths()?;
        Ok(sys)
    }

    /// Built-in presets: `"fibonacci"`, `"thue-morse"`, `"period-doubling"`.
    pub fn preset(name: &str) -> Result<Self> {
        let cfg = match name {
            "fibonacci" => SubstitutionConfig {
                alphabet: vec!["a".into(), "b".into()],
                rules: BTreeMap::from([
                    ("a".into(), RuleWord::Word("ab".into())),
                    ("b".into(), RuleWord::Word("a".into())),
                ]),
                lengths: LengthsSpec::Named("perron".into()),
                seed: "b|a".into(),
            },
            "thue-morse" => SubstitutionConfig {
                alphabet: vec!["a".into(), "b".into()],
                rules: BTreeMap::from([
                    ("a".into(), RuleWord::Word("ab".into())),
                    ("b".into(), RuleWord::Word("ba".into())),
                ]),
                lengths: LengthsSpec::Named("perron".into()),
                seed: "b|a".into(),
            },
            "period-doubling" => SubstitutionConfig {
                alphabet: vec!["a".into(), "b".into()],
                rules: BTreeMap::from([
                    ("a".into(), RuleWord::Word("ab".into())),
                    ("b".into(), RuleWord::Word("aa".into())),
                ]),
                lengths: LengthsSpec::Named("perron".into()),
                seed: "a|a".into(),
            },
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        Self::from_config(&cfg, name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> &[String] {
        &self.letters
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn letter_index(&self, name: &str) -> Result<usize> {
        self.letters
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::UnknownLetter(name.to_string()))
    }

    pub fn rule(&self, letter: usize) -> &[usize] {
        &self.rules[letter]
    }

    /// Substitution matrix `M[i][j]` = number of occurrences of letter `i`
    /// in the image of letter `j`.
    pub fn matrix(&self) -> Vec<Vec<u64>> {
        let a = self.letters.len();
        let mut m = vec![vec![0u64; a]; a];
        for (j, image) in self.rules.iter().enumerate() {
            for &i in image {
                m[i][j] += 1;
            }
        }
        m
    }

    /// Primitivity: some power of the substitution matrix is strictly
    /// positive. Checked on the positivity pattern up to the Wielandt bound.
    pub fn is_primitive(&self) -> bool {
        let a = self.letters.len();
        let m = self.matrix();
        let mut p: Vec<Vec<bool>> = m
            .iter()
            .map(|row| row.iter().map(|&c| c > 0).collect())
            .collect();
        let bound = a * a + 2;
        for _ in 0..bound {
            if p.iter().all(|row| row.iter().all(|&b| b)) {
                return true;
            }
            let mut q = vec![vec![false; a]; a];
            for i in 0..a {
                for k in 0..a {
                    if p[i][k] {
                        for (j, qij) in q[i].iter_mut().enumerate() {
                            if m[k][j] > 0 {
                                *qij = true;
                            }
                        }
                    }
                }
            }
            p = q;
        }
        p.iter().all(|row| row.iter().all(|&b| b))
    }

    /// Left Perron–Frobenius eigenvector (tile lengths), min-normalized to 1.
    pub fn perron_lengths(&self) -> Vec<f64> {
        let m = self.matrix();
        let a = self.letters.len();
        let mut v = vec![1.0f64; a];
        for _ in 0..512 {
            let mut w = vec![0.0f64; a];
            for (j, wj) in w.iter_mut().enumerate() {
                for i in 0..a {
                    *wj += v[i] * m[i][j] as f64;
                }
            }
            let s: f64 = w.iter().sum();
            for x in &mut w {
                *x /= s;
            }
            v = w;
        }
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        v.iter().map(|x| x / min).collect()
    }

    /// Right Perron–Frobenius eigenvector, normalized to sum 1: the
    /// asymptotic letter frequencies.
    pub fn perron_frequencies(&self) -> Vec<f64> {
        let m = self.matrix();
        let a = self.letters.len();
        let mut v = vec![1.0f64; a];
        for _ in 0..512 {
            let mut w = vec![0.0f64; a];
            for (i, wi) in w.iter_mut().enumerate() {
                for j in 0..a {
                    *wi += m[i][j] as f64 * v[j];
                }
            }
            let s: f64 = w.iter().sum();
            for x in &mut w {
                *x /= s;
            }
            v = w;
        }
        v
    }

    fn check_lengths(&self) -> Result<()> {
        let a = self.letters.len();
        if self.lengths.len() != a || self.lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Degenerate("tile lengths must be positive".into()));
        }
        let min = self.lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        if (min - 1.0).abs() > 1e-9 {
            return Err(Error::Degenerate(format!(
                "tile lengths must be scaled so the shortest is 1, got min {min}"
            )));
        }
        // left eigenvector property: l^T M = λ l^T with a consistent λ
        let m = self.matrix();
        let mut ratios = Vec::with_capacity(a);
        for j in 0..a {
            let lm: f64 = (0..a).map(|i| self.lengths[i] * m[i][j] as f64).sum();
            ratios.push(lm / self.lengths[j]);
        }
        let lambda = ratios[0];
        if ratios.iter().any(|r| (r - lambda).abs() > 1e-6 * lambda) {
            return Err(Error::Degenerate(
                "tile lengths are not a left eigenvector of the substitution matrix".into(),
            ));
        }
        Ok(())
    }

    /// Applies the rule `n` times to the word.
    pub fn iterate(&self, word: &[usize], n: usize, cap: usize) -> Result<Vec<usize>> {
        let mut w = word.to_vec();
        for _ in 0..n {
            let next_len: usize = w.iter().map(|&l| self.rules[l].len()).sum();
            if next_len > cap {
                return Err(Error::CapExceeded {
                    count: next_len,
                    cap,
                });
            }
            let mut next = Vec::with_capacity(next_len);
            for &l in &w {
                next.extend_from_slice(&self.rules[l]);
            }
            w = next;
        }
        Ok(w)
    }

    /// The set of legal two-letter words, computed by closing the factor
    /// set of iterated images.
    pub fn legal_two_words(&self) -> Vec<(usize, usize)> {
        let a = self.letters.len();
        let start = self.iterate(&[0], 4 + a, 1 << 22).unwrap_or_default();
        let mut set: BTreeSet<(usize, usize)> = start.windows(2).map(|w| (w[0], w[1])).collect();
        loop {
            let mut grew = false;
            for &(x, y) in set.clone().iter() {
                let mut img = self.rules[x].clone();
                img.extend_from_slice(&self.rules[y]);
                for w in img.windows(2) {
                    if set.insert((w[0], w[1])) {
                        grew = true;
                    }
                }
            }
            if !grew {
                return set.into_iter().collect();
            }
        }
    }

    /// The induced substitution on the legal two-letter words. For a legal
    /// word `xy`, the image consists of the `|rule(x)|` two-letter windows
    /// of `rule(x) rule(y)` starting inside `rule(x)`.
    pub fn induced(&self) -> Result<SubstitutionSystem> {
        if !self.is_primitive() {
            return Err(Error::NotPrimitive);
        }
        let legal = self.legal_two_words();
        let pair_index: BTreeMap<(usize, usize), usize> =
            legal.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let letters: Vec<String> = legal
            .iter()
            .map(|&(x, y)| format!("{}{}", self.letters[x], self.letters[y]))
            .collect();
        let mut rules = Vec::with_capacity(legal.len());
        for &(x, y) in &legal {
            let mut img = self.rules[x].clone();
            img.extend_from_slice(&self.rules[y]);
            let mut out = Vec::with_capacity(self.rules[x].len());
            for w in img.windows(2).take(self.rules[x].len()) {
                let id = pair_index.get(&(w[0], w[1])).ok_or_else(|| {
                    Error::Degenerate("induced image contains an illegal pair".into())
                })?;
                out.push(*id);
            }
            rules.push(out);
        }
        // the induced tile carries the length of its first original letter
        let lengths: Vec<f64> = legal.iter().map(|&(x, _)| self.lengths[x]).collect();

        let mut sys = SubstitutionSystem {
            letters,
            rules,
            lengths,
            seed: (0, 0),
            name: format!("{}-induced", self.name),
        };
        sys.seed = sys.find_induced_seed(&legal, self)?;
        sys.check_lengths()?;
        if !sys.is_primitive() {
            return Err(Error::NotPrimitive);
        }
        Ok(sys)
    }

    /// Searches for a legal induced seed pair with the two-sided
    /// fixed-point property.
    fn find_induced_seed(
        &self,
        pairs_as_letters: &[(usize, usize)],
        base: &SubstitutionSystem,
    ) -> Result<(usize, usize)> {
        // a pair (U, V) of induced letters is legal iff U = xy, V = yz
        // overlap and xyz is a legal 3-word of the base system
        let legal3: BTreeSet<(usize, usize, usize)> = {
            let w = base.iterate(&[0], 6 + base.letters.len(), 1 << 22)?;
            let mut s: BTreeSet<_> = w.windows(3).map(|t| (t[0], t[1], t[2])).collect();
            loop {
                let mut grew = false;
                for &(x, y, z) in s.clone().iter() {
                    let mut img = base.rules[x].clone();
                    img.extend_from_slice(&base.rules[y]);
                    img.extend_from_slice(&base.rules[z]);
                    for t in img.windows(3) {
                        if s.insert((t[0], t[1], t[2])) {
                            grew = true;
                        }
                    }
                }
                if !grew {
                    break;
                }
            }
            s
        };
        for (ui, &(x, y)) in pairs_as_letters.iter().enumerate() {
            for (vi, &(y2, z)) in pairs_as_letters.iter().enumerate() {
                if y != y2 || !legal3.contains(&(x, y, z)) {
                    continue;
                }
                if seed_power(self, ui, vi).is_some() {
                    return Ok((ui, vi));
                }
            }
        }
        Err(Error::IllegalSeed(
            "no two-sided fixed-point seed found for the induced system".into(),
        ))
    }
}

/// Smallest power `p <= 4` such that `rule^p(u)` ends in `u` and
/// `rule^p(v)` starts with `v`.
fn seed_power(sys: &SubstitutionSystem, u: usize, v: usize) -> Option<usize> {
    for p in 1..=4 {
        let iu = sys.iterate(&[u], p, 1 << 20).ok()?;
        let iv = sys.iterate(&[v], p, 1 << 20).ok()?;
        if iu.last() == Some(&u) && iv.first() == Some(&v) {
            return Some(p);
        }
    }
    None
}

/// A geometric substitution chain: tile left endpoints plus the letter
/// carried by each tile.
#[derive(Clone, Debug)]
pub struct ChainSample {
    sample: PointSample,
    letters: Vec<u32>,
    alphabet: Vec<String>,
    lengths: Vec<f64>,
    /// total length of the word left of the origin
    left_extent: f64,
    /// total length of the word right of the origin
    right_extent: f64,
}

impl ChainSample {
    pub fn sample(&self) -> &PointSample {
        &self.sample
    }

    pub fn letters(&self) -> &[u32] {
        &self.letters
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Largest radius `r` such that the chain covers the full interval
    /// `[-r, r]`; restricting to it gives an unbiased centered sample.
    pub fn balanced_radius(&self) -> f64 {
        self.left_extent.min(self.right_extent)
    }

    /// The restriction of the endpoint sample to the balanced radius.
    pub fn balanced_sample(&self) -> Result<PointSample> {
        self.sample.restrict(self.balanced_radius())
    }

    /// Sub-sample of the left endpoints carrying `letter`.
    pub fn letter_positions(&self, letter: &str) -> Result<PointSample> {
        let idx = self
            .alphabet
            .iter()
            .position(|l| l == letter)
            .ok_or_else(|| Error::UnknownLetter(letter.to_string()))? as u32;
        let mut coords = Vec::new();
        for (i, &l) in self.letters.iter().enumerate() {
            if l == idx {
                coords.push(self.sample.point(i)[0]);
            }
        }
        PointSample::from_generator(
            1,
            self.sample.radius(),
            Region::Ball,
            coords,
            format!("{}:{}", self.sample.provenance(), letter),
        )
    }

    /// Weighted comb with one atom per tile endpoint, weighted by letter.
    /// Letters with weight zero are dropped.
    pub fn weighted_comb(&self, weights: &BTreeMap<String, Complex64>) -> Result<WeightedComb> {
        let mut w_by_index = Vec::with_capacity(self.alphabet.len());
        for l in &self.alphabet {
            w_by_index.push(
                *weights
                    .get(l)
                    .ok_or_else(|| Error::Config(format!("missing weight for letter {l:?}")))?,
            );
        }
        let mut positions = Vec::new();
        let mut ws = Vec::new();
        for (i, &l) in self.letters.iter().enumerate() {
            let w = w_by_index[l as usize];
            if w.norm_sqr() > 0.0 {
                positions.push(self.sample.point(i)[0]);
                ws.push(w);
            }
        }
        WeightedComb::from_parts(1, positions, ws)
    }

    /// Letter frequency table of the chain.
    pub fn letter_frequencies(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.alphabet.len()];
        for &l in &self.letters {
            counts[l as usize] += 1;
        }
        counts
            .into_iter()
            .map(|c| c as f64 / self.letters.len().max(1) as f64)
            .collect()
    }

    /// Builds a chain from explicit words left and right of the origin;
    /// positions are exact integer combinations of tile lengths.
    pub(crate) fn from_words(
        left: &[usize],
        right: &[usize],
        alphabet: &[String],
        lengths: &[f64],
        provenance: String,
    ) -> Result<ChainSample> {
        let a = alphabet.len();
        let mut endpoints = Vec::with_capacity(left.len() + right.len());
        let mut letters = Vec::with_capacity(left.len() + right.len());

        // left word: walk from the origin outward, accumulating counts
        let mut counts = vec![0u64; a];
        let mut left_rev = Vec::with_capacity(left.len());
        for &l in left.iter().rev() {
            counts[l] += 1;
            let pos = -(0..a).map(|i| counts[i] as f64 * lengths[i]).sum::<f64>();
            left_rev.push((pos, l));
        }
        for (pos, l) in left_rev.into_iter().rev() {
            endpoints.push(pos);
            letters.push(l as u32);
        }
        let left_extent = endpoints.first().map(|p| -p).unwrap_or(0.0);

        // right word: tile k starts at the summed length of tiles 0..k
        let mut counts = vec![0u64; a];
        for &l in right {
            let pos = (0..a).map(|i| counts[i] as f64 * lengths[i]).sum::<f64>();
            endpoints.push(pos);
            letters.push(l as u32);
            counts[l] += 1;
        }
        let right_extent = (0..a).map(|i| counts[i] as f64 * lengths[i]).sum::<f64>();

        let radius = left_extent.max(right_extent);
        let sample = PointSample::from_generator(1, radius, Region::Ball, endpoints, provenance)?;
        let chain = ChainSample {
            sample,
            letters,
            alphabet: alphabet.to_vec(),
            lengths: lengths.to_vec(),
            left_extent,
            right_extent,
        };
        chain.check_gaps()?;
        Ok(chain)
    }

    fn check_gaps(&self) -> Result<()> {
        let n = self.len();
        let tol = (n as f64 * 1e-12).max(1e-12);
        for i in 0..n.saturating_sub(1) {
            let gap = self.sample.point(i + 1)[0] - self.sample.point(i)[0];
            let want = self.lengths[self.letters[i] as usize];
            if (gap - want).abs() > tol * want.max(1.0) {
                return Err(Error::Degenerate(format!(
                    "tile gap {gap} does not match letter length {want}"
                )));
            }
        }
        Ok(())
    }

    /// Rebuilds a chain from explicit tiles (used by sliding block maps).
    /// Endpoints must be increasing with gaps matching the letter lengths.
    pub(crate) fn from_tiles(
        endpoints: Vec<f64>,
        letters: Vec<u32>,
        alphabet: Vec<String>,
        lengths: Vec<f64>,
        provenance: String,
    ) -> Result<ChainSample> {
        if endpoints.len() != letters.len() || endpoints.is_empty() {
            return Err(Error::ShapeMismatch(
                "endpoints and letters must be nonempty and of equal length".into(),
            ));
        }
        let left_extent = -endpoints[0];
        let last = *endpoints.last().unwrap();
        let right_extent = last + lengths[*letters.last().unwrap() as usize];
        let radius = left_extent.max(right_extent).max(last.abs());
        let sample = PointSample::from_generator(1, radius, Region::Ball, endpoints, provenance)?;
        let chain = ChainSample {
            sample,
            letters,
            alphabet,
            lengths,
            left_extent,
            right_extent,
        };
        chain.check_gaps()?;
        Ok(chain)
    }
}

/// Geometric realization of `rule^n(seed)` laid out with tile lengths and
/// the origin at the seed boundary.
pub fn substitution_chain(sys: &SubstitutionSystem, n_iters: usize) -> Result<ChainSample> {
    substitution_chain_capped(sys, n_iters, DEFAULT_POINT_CAP)
}

pub fn substitution_chain_capped(
    sys: &SubstitutionSystem,
    n_iters: usize,
    cap: usize,
) -> Result<ChainSample> {
    if !sys.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    let (u, v) = sys.seed;
    if !sys.legal_two_words().contains(&(u, v)) {
        return Err(Error::IllegalSeed(format!(
            "seed {}|{} is not a legal two-letter word",
            sys.letters[u], sys.letters[v]
        )));
    }
    if seed_power(sys, u, v).is_none() {
        return Err(Error::IllegalSeed(format!(
            "seed {}|{} is not fixed by any small power of the rule",
            sys.letters[u], sys.letters[v]
        )));
    }
    let left = sys.iterate(&[u], n_iters, cap)?;
    let right = sys.iterate(&[v], n_iters, cap)?;
    if left.len() + right.len() > cap {
        return Err(Error::CapExceeded {
            count: left.len() + right.len(),
            cap,
        });
    }
    ChainSample::from_words(
        &left,
        &right,
        &sys.letters,
        &sys.lengths,
        format!("substitution:{}:n={}", sys.name, n_iters),
    )
}
