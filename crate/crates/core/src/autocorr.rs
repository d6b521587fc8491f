//! Finite-volume autocorrelation estimates.
//!
//! For a sample of a point set restricted to the ball of radius `R`, the
//! autocorrelation estimate collects the difference vectors `z = x - y` with
//! `|z| <= zmax` and weighs each by the number of realizing pairs divided by
//! the volume of the averaging region. The weight at `z = 0` is then exactly
//! the point density estimate, and the estimate converges (for uniquely
//! ergodic generators) as `R` grows; the [`eberlein_ladder`] tracks that
//! convergence over an increasing list of radii.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::dist;
use crate::pointset::{
    difference_vectors, lex_cmp, matching_tolerance, CellGrid, PointSample, WeightedComb,
};

/// Which points must lie inside the averaging region when pairs are counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EdgeRule {
    /// Both members of a pair inside the full ball; no edge correction.
    #[default]
    BothInside,
    /// Only the first member restricted, to the deflated ball of radius
    /// `R - zmax`, so every partner within `zmax` is present in the sample.
    /// The two rules agree within `O(zmax / R)`.
    OneInside,
}

/// A finite-volume autocorrelation: difference vectors weighted by
/// pair frequency per unit volume.
#[derive(Clone, Debug)]
pub struct AutocorrEstimate {
    pub radius: f64,
    pub zmax: f64,
    pub rule: EdgeRule,
    pub comb: WeightedComb,
}

impl AutocorrEstimate {
    /// Frequency of the difference vector `z`, zero if absent.
    pub fn eta(&self, z: &[f64], tol: f64) -> Complex64 {
        self.comb.weight_at(z, tol)
    }

    /// The density estimate, i.e. the weight at the origin.
    pub fn density(&self) -> f64 {
        let dim = self.comb.dim();
        self.eta(&vec![0.0; dim], 1e-9).re
    }
}

/// Autocorrelation of an unweighted point sample.
pub fn autocorrelation(sample: &PointSample, zmax: f64) -> Result<AutocorrEstimate> {
    autocorrelation_with_rule(sample, zmax, EdgeRule::BothInside)
}

pub fn autocorrelation_with_rule(
    sample: &PointSample,
    zmax: f64,
    rule: EdgeRule,
) -> Result<AutocorrEstimate> {
    if sample.is_empty() {
        return Err(Error::Empty("autocorrelation requires a nonempty sample"));
    }
    if zmax > sample.radius() {
        return Err(Error::OutOfWindow {
            requested: zmax,
            available: sample.radius(),
        });
    }
    match rule {
        EdgeRule::BothInside => {
            let mut comb = difference_vectors(sample, zmax)?;
            comb.divide(sample.volume());
            Ok(AutocorrEstimate {
                radius: sample.radius(),
                zmax,
                rule,
                comb,
            })
        }
        EdgeRule::OneInside => {
            let r_in = sample.radius() - zmax;
            if !(r_in > 0.0) {
                return Err(Error::Degenerate(format!(
                    "deflated radius {r_in} is not positive"
                )));
            }
            let comb = WeightedComb::from_sample(sample);
            let mut est = weighted_pairs(&comb, sample.radius(), zmax, r_in)?;
            est.divide(sample.region().volume(sample.dim(), r_in));
            Ok(AutocorrEstimate {
                radius: sample.radius(),
                zmax,
                rule,
                comb: est,
            })
        }
    }
}

/// Autocorrelation of a weighted comb bounded to the ball of radius
/// `radius`: atoms `z` with weights `Σ w(x) conj(w(y))` over pairs
/// `x - y = z`, divided by the ball volume.
pub fn weighted_autocorrelation(
    comb: &WeightedComb,
    radius: f64,
    zmax: f64,
) -> Result<AutocorrEstimate> {
    if zmax > 2.0 * radius {
        return Err(Error::OutOfWindow {
            requested: zmax,
            available: 2.0 * radius,
        });
    }
    let mut est = weighted_pairs(comb, radius, zmax, f64::INFINITY)?;
    est.divide(crate::numeric::ball_volume(comb.dim(), radius));
    Ok(AutocorrEstimate {
        radius,
        zmax,
        rule: EdgeRule::BothInside,
        comb: est,
    })
}

/// Pair sums `Σ w(x) conj(w(y))` binned over `z = x - y`, `|z| <= zmax`.
/// Pairs are only counted when `|x| <= x_cutoff`. Counting runs over
/// fixed-size point blocks in parallel; per-bin partial sums are merged in
/// block order, so the result does not depend on the thread count.
fn weighted_pairs(
    comb: &WeightedComb,
    radius: f64,
    zmax: f64,
    x_cutoff: f64,
) -> Result<WeightedComb> {
    let dim = comb.dim();
    let eps = matching_tolerance(comb.positions(), dim, radius);
    let grid = CellGrid::build(comb.positions(), dim, zmax);
    let zmax_sq = zmax * zmax * (1.0 + 1e-12);

    let block_bins = |range: std::ops::Range<usize>| {
        let mut bins: HashMap<Vec<i64>, (Vec<f64>, Complex64, u64)> = HashMap::new();
        let mut z = vec![0.0f64; dim];
        let mut key = vec![0i64; dim];
        for i in range {
            let xi = comb.position(i);
            if crate::numeric::norm(xi) > x_cutoff {
                continue;
            }
            let wi = comb.weight(i);
            grid.for_neighbors(xi, |j| {
                let xj = comb.position(j);
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
                        .or_insert_with(|| (vec![0.0; dim], Complex64::new(0.0, 0.0), 0));
                    for k in 0..dim {
                        e.0[k] += z[k];
                    }
                    e.1 += wi * comb.weight(j).conj();
                    e.2 += 1;
                }
            });
        }
        bins
    };

    const BLOCK: usize = 1 << 13;
    let n = comb.len();
    let mut bins: HashMap<Vec<i64>, (Vec<f64>, Complex64, u64)> = HashMap::new();
    if n <= BLOCK {
        bins = block_bins(0..n);
    } else {
        use rayon::prelude::*;
        let maps: Vec<_> = (0..n.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| block_bins(b * BLOCK..((b + 1) * BLOCK).min(n)))
            .collect();
        for m in maps {
            for (key, (sum, w, cnt)) in m {
                let e = bins
                    .entry(key)
                    .or_insert_with(|| (vec![0.0; dim], Complex64::new(0.0, 0.0), 0));
                for k in 0..dim {
                    e.0[k] += sum[k];
                }
                e.1 += w;
                e.2 += cnt;
            }
        }
    }

    let mut atoms: Vec<(Vec<f64>, Complex64)> = bins
        .into_values()
        .filter(|(_, w, _)| w.norm_sqr() > 0.0)
        .map(|(sum, w, cnt)| {
            let pos: Vec<f64> = sum.iter().map(|s| s / cnt as f64).collect();
            (pos, w)
        })
        .collect();
    atoms.sort_by(|a, b| lex_cmp(&a.0, &b.0));

    let mut positions = Vec::with_capacity(atoms.len() * dim);
    let mut weights = Vec::with_capacity(atoms.len());
    for (pos, w) in atoms {
        positions.extend_from_slice(&pos);
        weights.push(w);
    }
    WeightedComb::from_parts(dim, positions, weights)
}

/// Autocorrelation estimates over an increasing list of radii, with the
/// per-atom deviation between consecutive rungs.
#[derive(Clone, Debug)]
pub struct ConvergenceLadder {
    pub radii: Vec<f64>,
    pub zmax: f64,
    /// Union of atom positions over all rungs, lexicographically sorted.
    pub atoms: Vec<Vec<f64>>,
    /// `table[a][r]` is the weight of atom `a` at rung `r` (0 if absent).
    pub table: Vec<Vec<Complex64>>,
    /// Sup-deviation between consecutive rungs.
    pub deviations: Vec<f64>,
    pub tolerance: f64,
    pub converged: bool,
}

/// Runs the estimator at every radius of the ladder. The generator is asked
/// once per rung for a sample of the requested radius.
pub fn eberlein_ladder(
    generator: &dyn Fn(f64) -> Result<PointSample>,
    radii: &[f64],
    zmax: f64,
    tolerance: f64,
) -> Result<ConvergenceLadder> {
    if radii.len() < 2 {
        return Err(Error::Degenerate("ladder needs at least two radii".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotoneRadii);
    }
    if zmax > radii[0] {
        return Err(Error::OutOfWindow {
            requested: zmax,
            available: radii[0],
        });
    }
    let estimates: Vec<AutocorrEstimate> = radii
        .iter()
        .map(|&r| {
            let s = generator(r)?;
            autocorrelation(&s, zmax)
        })
        .collect::<Result<_>>()?;

    // merge atoms across rungs within a shared tolerance
    let tol = estimates
        .iter()
        .map(|e| {
            matching_tolerance(e.comb.positions(), e.comb.dim(), e.radius)
        })
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 10.0;
    let dim = estimates[0].comb.dim();
    let mut tagged: Vec<(Vec<f64>, usize, Complex64)> = Vec::new();
    for (r, e) in estimates.iter().enumerate() {
        for (p, w) in e.comb.atoms() {
            tagged.push((p.to_vec(), r, w));
        }
    }
    tagged.sort_by(|a, b| lex_cmp(&a.0, &b.0));

    let mut atoms: Vec<Vec<f64>> = Vec::new();
    let mut table: Vec<Vec<Complex64>> = Vec::new();
    for (pos, rung, w) in tagged {
        let matches = atoms
            .last()
            .map(|last| dist(last, &pos) <= tol)
            .unwrap_or(false);
        if !matches {
            atoms.push(pos);
            table.push(vec![Complex64::new(0.0, 0.0); radii.len()]);
        }
        let row = table.last_mut().unwrap();
        row[rung] += w;
    }
    let _ = dim;

    let mut deviations = Vec::with_capacity(radii.len() - 1);
    for r in 0..radii.len() - 1 {
        let mut sup: f64 = 0.0;
        for row in &table {
            sup = sup.max((row[r] - row[r + 1]).norm());
        }
        deviations.push(sup);
    }
    let converged = deviations.last().map(|&d| d < tolerance).unwrap_or(false);
    Ok(ConvergenceLadder {
        radii: radii.to_vec(),
        zmax,
        atoms,
        table,
        deviations,
        tolerance,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cps::{model_set_sample, ModelSetSpec};
    use crate::generators::{substitution_chain, LatticeSpec, SubstitutionSystem};
    use std::collections::BTreeMap;

    fn integer_sample(radius: f64) -> PointSample {
        LatticeSpec::new(vec![vec![1.0]]).unwrap().sample(radius).unwrap()
    }

    #[test]
    fn integer_lattice_frequencies() {
        let s = integer_sample(1e4);
        let est = autocorrelation(&s, 10.0).unwrap();
        for z in -10i64..=10 {
            let got = est.eta(&[z as f64], 1e-9).re;
            assert!(
                (got - 1.0).abs() < 1e-3,
                "eta({z}) = {got} should be within 1e-3 of 1"
            );
        }
        // no atoms away from the integers
        for (z, _) in est.comb.atoms() {
            assert!(
                (z[0] - z[0].round()).abs() < 1e-9,
                "unexpected non-integer atom at {z:?}"
            );
        }
    }

    #[test]
    fn crystallographic_frequencies() {
        let lat = LatticeSpec::new(vec![vec![1.0]]).unwrap();
        let spec = crate::generators::CrystallographicSpec::new(
            lat,
            vec![vec![0.0], vec![1.0 / 3.0]],
        )
        .unwrap();
        let s = spec.sample(1e4).unwrap();
        let est = autocorrelation(&s, 2.0).unwrap();
        assert!((est.eta(&[0.0], 1e-9).re - 2.0).abs() < 1e-3);
        assert!((est.eta(&[1.0 / 3.0], 1e-9).re - 1.0).abs() < 1e-3);
        assert!((est.eta(&[1.0], 1e-9).re - 2.0).abs() < 1e-3);
    }

    #[test]
    fn singleton_sample() {
        let s = PointSample::new(1, 2.0, vec![0.0], "singleton").unwrap();
        let est = autocorrelation(&s, 1.0).unwrap();
        assert_eq!(est.comb.len(), 1);
        assert!((est.eta(&[0.0], 1e-9).re - 1.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn empty_sample_rejected() {
        let s = PointSample::new(1, 2.0, vec![], "empty").unwrap();
        assert!(matches!(
            autocorrelation(&s, 1.0),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn density_matches_eta_zero_exactly() {
        let s = integer_sample(500.0);
        let est = autocorrelation(&s, 5.0).unwrap();
        assert_eq!(est.density(), s.density());
    }

    #[test]
    fn ladder_deviations_shrink_like_one_over_r() {
        let gen = |r: f64| LatticeSpec::new(vec![vec![1.0]]).unwrap().sample(r);
        let ladder = eberlein_ladder(&gen, &[100.0, 1000.0, 10000.0], 10.0, 1e-2).unwrap();
        assert_eq!(ladder.deviations.len(), 2);
        let ratio = ladder.deviations[0] / ladder.deviations[1];
        assert!(
            (ratio - 10.0).abs() < 0.5,
            "deviation ratio {ratio} should be close to the radius ratio"
        );
        assert!(ladder.converged);
    }

    #[test]
    fn ladder_rejects_non_monotone_radii() {
        let gen = |r: f64| LatticeSpec::new(vec![vec![1.0]]).unwrap().sample(r);
        assert!(matches!(
            eberlein_ladder(&gen, &[100.0, 50.0], 10.0, 1e-2),
            Err(Error::NonMonotoneRadii)
        ));
    }

    #[test]
    fn fibonacci_ladder_converges() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let gen = move |r: f64| model_set_sample(&spec, r);
        let ladder = eberlein_ladder(&gen, &[2500.0, 5000.0, 10000.0], 8.0, 1e-2).unwrap();
        let last = *ladder.deviations.last().unwrap();
        assert!(last < 1e-2, "deviation {last} between last rungs");
        assert!(ladder.converged);
    }

    #[test]
    fn translation_invariance_at_matched_radius() {
        // both the lattice and its translate by 0.3 hold 21 points in
        // [-10.5, 10.5], so the estimates agree exactly
        let r = 10.5;
        let s = integer_sample(r);
        let coords: Vec<f64> = s.coords().iter().map(|x| x + 0.3).collect();
        let t = PointSample::new(1, r, coords, "integers+0.3").unwrap();
        let a = autocorrelation(&s, 3.0).unwrap();
        let b = autocorrelation(&t, 3.0).unwrap();
        assert_eq!(a.comb.len(), b.comb.len());
        for (z, w) in a.comb.atoms() {
            assert_eq!(b.eta(z, 1e-9).re, w.re);
        }
    }

    #[test]
    fn translation_invariance_within_bias_bound() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let s = model_set_sample(&spec, 2000.0).unwrap();
        let t = s.translate(&[0.3]).unwrap();
        let zmax = 5.0;
        let a = autocorrelation(&s.restrict(t.radius()).unwrap(), zmax).unwrap();
        let b = autocorrelation(&t, zmax).unwrap();
        let bound = 2.0 * s.density() * (0.3 + zmax) / t.radius();
        for (z, w) in a.comb.atoms() {
            let dev = (b.eta(z, 1e-6) - w).norm();
            assert!(dev <= bound, "dev {dev} at {z:?} exceeds bound {bound}");
        }
    }

    #[test]
    fn weighted_reduces_to_unweighted_for_unit_weights() {
        let s = integer_sample(200.0);
        let comb = WeightedComb::from_sample(&s);
        let a = autocorrelation(&s, 10.0).unwrap();
        let b = weighted_autocorrelation(&comb, s.radius(), 10.0).unwrap();
        assert_eq!(a.comb.len(), b.comb.len());
        for (z, w) in a.comb.atoms() {
            assert_eq!(b.eta(z, 1e-9).re, w.re);
            assert_eq!(b.eta(z, 1e-9).im, 0.0);
        }
    }

    #[test]
    fn single_weighted_atom() {
        let w = Complex64::new(3.0, 4.0);
        let comb = WeightedComb::new(1, vec![0.5], vec![w]).unwrap();
        let est = weighted_autocorrelation(&comb, 2.0, 1.0).unwrap();
        assert_eq!(est.comb.len(), 1);
        assert!((est.eta(&[0.0], 1e-9).re - w.norm_sqr() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn thue_morse_signed_weights_anticorrelate() {
        let sys = SubstitutionSystem::preset("thue-morse").unwrap();
        let chain = substitution_chain(&sys, 11).unwrap();
        let weights = BTreeMap::from([
            ("a".to_string(), Complex64::new(1.0, 0.0)),
            ("b".to_string(), Complex64::new(-1.0, 0.0)),
        ]);
        let comb = chain.weighted_comb(&weights).unwrap();
        let r = chain.balanced_radius();
        let est = weighted_autocorrelation(&comb, r, 4.0).unwrap();
        let eta0 = est.eta(&[0.0], 1e-9).re;
        let eta1 = est.eta(&[1.0], 1e-9).re;
        assert!((eta0 - 1.0).abs() < 1e-2, "eta(0) = {eta0}");
        assert!(
            (-1.0..0.0).contains(&eta1),
            "eta(1) = {eta1} should be anticorrelated"
        );
        // known limit value for the signed pair correlation at distance 1
        assert!((eta1 + 1.0 / 3.0).abs() < 1e-2);
    }

    #[test]
    fn weighted_pairs_match_brute_force() {
        let sys = SubstitutionSystem::preset("thue-morse").unwrap();
        let chain = substitution_chain(&sys, 8).unwrap();
        let weights = BTreeMap::from([
            ("a".to_string(), Complex64::new(1.0, 0.0)),
            ("b".to_string(), Complex64::new(-1.0, 0.0)),
        ]);
        let comb = chain.weighted_comb(&weights).unwrap();
        let r = chain.balanced_radius();
        let zmax = 6.0;
        let est = weighted_autocorrelation(&comb, r, zmax).unwrap();

        // quadratic brute-force oracle
        let vol = 2.0 * r;
        let mut expected: Vec<(f64, Complex64)> = Vec::new();
        for i in 0..comb.len() {
            for j in 0..comb.len() {
                let z = comb.position(i)[0] - comb.position(j)[0];
                if z.abs() <= zmax {
                    let w = comb.weight(i) * comb.weight(j).conj();
                    match expected.iter_mut().find(|(p, _)| (*p - z).abs() < 1e-9) {
                        Some((_, acc)) => *acc += w,
                        None => expected.push((z, w)),
                    }
                }
            }
        }
        for (z, w) in expected {
            if w.norm_sqr() == 0.0 {
                continue;
            }
            let got = est.eta(&[z], 1e-9);
            let want = w / vol;
            assert!(
                (got - want).norm() < 1e-12,
                "mismatch at z = {z}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn origin_dominates_point_set_counts() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let s = model_set_sample(&spec, 500.0).unwrap();
        let est = autocorrelation(&s, 20.0).unwrap();
        let eta0 = est.density();
        for (_, w) in est.comb.atoms() {
            assert!(w.re <= eta0 + 1e-15);
        }
    }

    #[test]
    fn hermitian_symmetry_exact() {
        // complex weights: phases along the chain
        let positions: Vec<f64> = (0..64).map(|i| i as f64 - 32.0).collect();
        let weights: Vec<Complex64> = (0..64)
            .map(|i| Complex64::from_polar(1.0, 0.37 * i as f64))
            .collect();
        let comb = WeightedComb::new(1, positions, weights).unwrap();
        let est = weighted_autocorrelation(&comb, 32.0, 8.0).unwrap();
        for (z, w) in est.comb.atoms() {
            let neg: Vec<f64> = z.iter().map(|c| -c).collect();
            let wn = est.eta(&neg, 1e-9);
            assert!(
                (wn - w.conj()).norm() < 1e-12,
                "eta(-z) != conj(eta(z)) at {z:?}"
            );
        }
    }

    #[test]
    fn edge_rules_agree_within_bias() {
        let spec = ModelSetSpec::preset("fibonacci-cps").unwrap();
        let s = model_set_sample(&spec, 2000.0).unwrap();
        let zmax = 10.0;
        let a = autocorrelation_with_rule(&s, zmax, EdgeRule::BothInside).unwrap();
        let b = autocorrelation_with_rule(&s, zmax, EdgeRule::OneInside).unwrap();
        let bound = 4.0 * s.density() * zmax / s.radius();
        for (z, w) in a.comb.atoms() {
            let dev = (b.eta(z, 1e-6) - w).norm();
            assert!(
                dev <= bound,
                "edge rules disagree by {dev} at {z:?}, bound {bound}"
            );
        }
    }
}
