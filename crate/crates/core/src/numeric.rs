//! Small numeric helpers shared across the crate.

/// Volume of the unit ball in `dim` dimensions.
///
/// Uses the two-step recurrence v_d = 2π v_{d-2} / d, which is exact in the
/// floating-point sense for the small dimensions used here.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0,
        d => 2.0 * std::f64::consts::PI * unit_ball_volume(d - 2) / d as f64,
    }
}

/// Volume of the centered ball of radius `r` in `dim` dimensions.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    unit_ball_volume(dim) * r.powi(dim as i32)
}

/// Euclidean norm of a coordinate slice.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Squared Euclidean norm.
pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum()
}

/// Euclidean distance between two coordinate slices of equal length.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compensated (Kahan) accumulator. Summation order is fixed by the caller,
/// so results are reproducible across runs and thread counts.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Fixed-width float formatting (17 significant digits) used for canonical
/// JSON and CSV output so that re-runs are byte-identical.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        // normalize -0.0
        return "0.0000000000000000e0".to_string();
    }
    format!("{:.16e}", x)
}

/// Golden-section maximization of a unimodal function on `[a, b]` down to an
/// interval of width `tol`. Returns the abscissa of the maximum.
pub fn golden_section_max(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_volumes_match_known_values() {
        assert_relative_eq!(unit_ball_volume(1), 2.0);
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI);
        assert_relative_eq!(unit_ball_volume(3), 4.0 / 3.0 * std::f64::consts::PI);
        assert_relative_eq!(ball_volume(1, 5.0), 10.0);
        assert_relative_eq!(ball_volume(2, 2.0), 4.0 * std::f64::consts::PI);
    }

    #[test]
    fn kahan_sums_many_small_terms() {
        let mut k = KahanSum::new();
        for _ in 0..1_000_000 {
            k.add(0.1);
        }
        assert_relative_eq!(k.value(), 100_000.0, max_relative = 1e-12);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let x = golden_section_max(0.0, 1.0, 1e-9, |x| -(x - 0.3) * (x - 0.3));
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn float_format_is_stable() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_float(-0.0), "0.0000000000000000e0");
    }
}
