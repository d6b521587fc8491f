//! Serialization: CSV and JSON for samples, combs and spectra, canonical
//! JSON for config hashing, and the SVG disc plot of a Bragg list.
//!
//! All floating-point output goes through a fixed 17-significant-digit
//! format, so re-running a command byte-reproduces its files.

use num_complex::Complex64;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::autocorr::ConvergenceLadder;
use crate::diffraction::{BraggList, ClosedFormSpectrum};
use crate::error::{Error, Result};
use crate::numeric::fmt_float;
use crate::pointset::{PointSample, Region, WeightedComb};
use crate::quasiperiodic::QpSpectrum;

fn headers(prefix: &str, dim: usize) -> String {
    (1..=dim)
        .map(|i| format!("{prefix}{i}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// CSV with columns `x1..xd`, one row per point.
pub fn sample_to_csv(s: &PointSample) -> String {
    let mut out = String::new();
    out.push_str(&headers("x", s.dim()));
    out.push('\n');
    for p in s.points() {
        let row: Vec<String> = p.iter().map(|c| fmt_float(*c)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV with columns `<prefix>1..<prefix>d, <re_name>, <im_name>`.
pub fn comb_to_csv(c: &WeightedComb, prefix: &str, re_name: &str, im_name: &str) -> String {
    let mut out = String::new();
    out.push_str(&headers(prefix, c.dim()));
    out.push_str(&format!(",{re_name},{im_name}\n"));
    for (p, w) in c.atoms() {
        let mut row: Vec<String> = p.iter().map(|c| fmt_float(*c)).collect();
        row.push(fmt_float(w.re));
        row.push(fmt_float(w.im));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV with columns `k1..kd, intensity, amp_re, amp_im, R`.
pub fn bragg_to_csv(list: &BraggList) -> String {
    let dim = list.peaks.first().map(|p| p.k.len()).unwrap_or(1);
    let mut out = String::new();
    out.push_str(&headers("k", dim));
    out.push_str(",intensity,amp_re,amp_im,R\n");
    for p in &list.peaks {
        let amp = p.intensity.sqrt();
        let mut row: Vec<String> = p.k.iter().map(|c| fmt_float(*c)).collect();
        row.push(fmt_float(p.intensity));
        row.push(fmt_float(amp * p.phase.cos()));
        row.push(fmt_float(amp * p.phase.sin()));
        row.push(fmt_float(list.radius));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV with columns `k1..kd, intensity` for a closed-form spectrum.
pub fn spectrum_to_csv(s: &ClosedFormSpectrum) -> String {
    let dim = s.atoms.first().map(|(k, _)| k.len()).unwrap_or(1);
    let mut out = String::new();
    out.push_str(&headers("k", dim));
    out.push_str(",intensity\n");
    for (k, i) in &s.atoms {
        let mut row: Vec<String> = k.iter().map(|c| fmt_float(*c)).collect();
        row.push(fmt_float(*i));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV with columns `k1..kd, mass` for a quasiperiodic spectrum.
pub fn qp_spectrum_to_csv(s: &QpSpectrum) -> String {
    let dim = s.atoms.first().map(|(k, _)| k.len()).unwrap_or(1);
    let mut out = String::new();
    out.push_str(&headers("k", dim));
    out.push_str(",mass\n");
    for (k, m) in &s.atoms {
        let mut row: Vec<String> = k.iter().map(|c| fmt_float(*c)).collect();
        row.push(fmt_float(*m));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV with columns `z1..zd` plus one `eta_re/eta_im` pair per ladder rung.
pub fn ladder_to_csv(l: &ConvergenceLadder) -> String {
    let dim = l.atoms.first().map(|a| a.len()).unwrap_or(1);
    let mut out = String::new();
    out.push_str(&headers("z", dim));
    for r in &l.radii {
        out.push_str(&format!(",eta_re_R{r},eta_im_R{r}"));
    }
    out.push('\n');
    for (atom, row) in l.atoms.iter().zip(&l.table) {
        let mut cells: Vec<String> = atom.iter().map(|c| fmt_float(*c)).collect();
        for w in row {
            cells.push(fmt_float(w.re));
            cells.push(fmt_float(w.im));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// JSON form of a sample: `{dim, radius, provenance, points: [[..], ..]}`
/// (plus `region: "box"` for box-shaped regions).
pub fn sample_to_json(s: &PointSample) -> Value {
    let points: Vec<Value> = s
        .points()
        .map(|p| Value::Array(p.iter().map(|&c| json!(c)).collect()))
        .collect();
    let mut obj = Map::new();
    obj.insert("dim".into(), json!(s.dim()));
    obj.insert("radius".into(), json!(s.radius()));
    obj.insert("provenance".into(), json!(s.provenance()));
    if s.region() == Region::Box {
        obj.insert("region".into(), json!("box"));
    }
    obj.insert("points".into(), Value::Array(points));
    Value::Object(obj)
}

pub fn sample_from_json(v: &Value) -> Result<PointSample> {
    let dim = v
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Config("sample JSON missing dim".into()))? as usize;
    let radius = v
        .get("radius")
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Config("sample JSON missing radius".into()))?;
    let provenance = v
        .get("provenance")
        .and_then(Value::as_str)
        .unwrap_or("json")
        .to_string();
    let is_box = v.get("region").and_then(Value::as_str) == Some("box");
    let points = v
        .get("points")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config("sample JSON missing points".into()))?;
    let mut coords = Vec::with_capacity(points.len() * dim);
    for p in points {
        let row = p
            .as_array()
            .ok_or_else(|| Error::Config("point must be an array".into()))?;
        if row.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "point of length {} in dimension {dim}",
                row.len()
            )));
        }
        for c in row {
            coords.push(
                c.as_f64()
                    .ok_or_else(|| Error::Config("non-numeric coordinate".into()))?,
            );
        }
    }
    if is_box {
        PointSample::new_box(dim, radius, coords, provenance)
    } else {
        PointSample::new(dim, radius, coords, provenance)
    }
}

/// JSON form of a comb: `{dim, atoms: [[[x..], [re, im]], ..]}`.
pub fn comb_to_json(c: &WeightedComb) -> Value {
    let atoms: Vec<Value> = c
        .atoms()
        .map(|(p, w)| {
            json!([
                p.iter().map(|&c| json!(c)).collect::<Vec<_>>(),
                [w.re, w.im]
            ])
        })
        .collect();
    json!({ "dim": c.dim(), "atoms": atoms })
}

pub fn comb_from_json(v: &Value) -> Result<WeightedComb> {
    let dim = v
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Config("comb JSON missing dim".into()))? as usize;
    let atoms = v
        .get("atoms")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config("comb JSON missing atoms".into()))?;
    let mut positions = Vec::new();
    let mut weights = Vec::new();
    for a in atoms {
        let pair = a
            .as_array()
            .filter(|p| p.len() == 2)
            .ok_or_else(|| Error::Config("atom must be [position, [re, im]]".into()))?;
        let pos = pair[0]
            .as_array()
            .ok_or_else(|| Error::Config("atom position must be an array".into()))?;
        if pos.len() != dim {
            return Err(Error::ShapeMismatch("atom dimension mismatch".into()));
        }
        for c in pos {
            positions.push(
                c.as_f64()
                    .ok_or_else(|| Error::Config("non-numeric coordinate".into()))?,
            );
        }
        let w = pair[1]
            .as_array()
            .filter(|w| w.len() == 2)
            .ok_or_else(|| Error::Config("weight must be [re, im]".into()))?;
        weights.push(Complex64::new(
            w[0].as_f64().unwrap_or(f64::NAN),
            w[1].as_f64().unwrap_or(f64::NAN),
        ));
    }
    WeightedComb::new(dim, positions, weights)
}

/// Canonical JSON: keys sorted (the default map is ordered), floats in the
/// fixed 17-digit format, no whitespace. Hash input for run manifests.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&fmt_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization"))
        }
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(x, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            out.push('{');
            for (i, (k, x)) in m.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serialization"));
                out.push(':');
                write_canonical(x, out);
            }
            out.push('}');
        }
    }
}

/// SHA-256 of the canonical JSON form, as lowercase hex.
pub fn config_hash(v: &Value) -> String {
    let canon = canonical_json(v);
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// SVG plot of a Bragg list: one disc per peak, centered at `k`, with area
/// proportional to the intensity. One-dimensional lists are drawn along a
/// horizontal axis.
pub fn bragg_svg(list: &BraggList, kmax: f64) -> String {
    let dim = list.peaks.first().map(|p| p.k.len()).unwrap_or(1);
    let size = 640.0;
    let margin = 40.0;
    let scale = (size - 2.0 * margin) / (2.0 * kmax);
    let to_px = |c: f64| margin + (c + kmax) * scale;

    let imax = list
        .peaks
        .iter()
        .map(|p| p.intensity)
        .fold(0.0f64, f64::max)
        .max(list.threshold);
    // the largest disc gets a radius of 12 px; area stays proportional
    let disc = |i: f64| 12.0 * (i / imax).sqrt();

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {size} {size}\" width=\"{size}\" height=\"{size}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // axes
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#cccccc\"/>\n",
        margin,
        size / 2.0,
        size - margin,
        size / 2.0,
    ));
    if dim >= 2 {
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#cccccc\"/>\n",
            size / 2.0,
            margin,
            size / 2.0,
            size - margin,
        ));
    }
    for p in &list.peaks {
        let x = to_px(p.k[0]);
        let y = if dim >= 2 { to_px(-p.k[1]) } else { size / 2.0 };
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"black\"/>\n",
            fmt_float(x),
            fmt_float(y),
            fmt_float(disc(p.intensity)),
        ));
    }
    out.push_str(&format!(
        "<text x=\"{margin}\" y=\"20\" font-size=\"12\" font-family=\"monospace\">threshold={} R={} disc area prop. to intensity, max I={}</text>\n",
        fmt_float(list.threshold),
        fmt_float(list.radius),
        fmt_float(imax),
    ));
    out.push_str("</svg>\n");
    out
}

/// Parses a CSV produced by [`bragg_to_csv`], [`spectrum_to_csv`] or
/// [`qp_spectrum_to_csv`]: leading `k*` columns and one value column named
/// `intensity` or `mass`. Returns `(k, value)` rows.
pub fn parse_spectrum_csv(text: &str) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::ShapeMismatch("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let kdim = cols.iter().take_while(|c| c.starts_with('k')).count();
    if kdim == 0 {
        return Err(Error::ShapeMismatch("no k columns in header".into()));
    }
    let value_col = cols
        .iter()
        .position(|c| *c == "intensity" || *c == "mass")
        .ok_or_else(|| Error::ShapeMismatch("no intensity/mass column".into()))?;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols.len() {
            return Err(Error::ShapeMismatch(format!(
                "row {} has {} cells, header has {}",
                lineno + 2,
                cells.len(),
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::ShapeMismatch(format!("bad number {s:?}: {e}")))
        };
        let k: Vec<f64> = cells[..kdim]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_>>()?;
        rows.push((k, parse(cells[value_col])?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::BraggPeak;
    use crate::generators::LatticeSpec;

    #[test]
    fn sample_json_round_trip() {
        let s = LatticeSpec::new(vec![vec![1.0]]).unwrap().sample(5.0).unwrap();
        let v = sample_to_json(&s);
        let back = sample_from_json(&v).unwrap();
        assert_eq!(back.dim(), s.dim());
        assert_eq!(back.radius(), s.radius());
        assert_eq!(back.coords(), s.coords());
        assert_eq!(back.provenance(), s.provenance());
    }

    #[test]
    fn comb_json_round_trip() {
        let comb = WeightedComb::new(
            2,
            vec![0.0, 0.0, 1.5, -2.25],
            vec![Complex64::new(1.0, 0.0), Complex64::new(-0.5, 2.0)],
        )
        .unwrap();
        let v = comb_to_json(&comb);
        let back = comb_from_json(&v).unwrap();
        assert_eq!(back.dim(), 2);
        assert_eq!(back.positions(), comb.positions());
        assert_eq!(back.weights(), comb.weights());
    }

    #[test]
    fn csv_row_counts_and_headers() {
        let s = LatticeSpec::new(vec![vec![1.0]]).unwrap().sample(100.0).unwrap();
        let csv = sample_to_csv(&s);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x1");
        assert_eq!(lines.len(), 202); // header + 201 points

        let comb = WeightedComb::from_sample(&s);
        let ccsv = comb_to_csv(&comb, "z", "eta_re", "eta_im");
        assert!(ccsv.starts_with("z1,eta_re,eta_im\n"));
    }

    #[test]
    fn canonical_json_sorts_keys_and_formats_floats() {
        let a: Value = serde_json::from_str(r#"{"b": 1.5, "a": {"y": 2, "x": 3.0}}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a": {"x": 3.0, "y": 2}, "b": 1.5}"#).unwrap();
        assert_eq!(canonical_json(&a), canonical_json(&b));
        assert_eq!(config_hash(&a), config_hash(&b));
        assert!(canonical_json(&a).contains("1.5000000000000000e0"));
    }

    #[test]
    fn hash_changes_with_content() {
        let a: Value = serde_json::from_str(r#"{"radius": 100.0}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"radius": 200.0}"#).unwrap();
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn svg_is_valid_even_for_empty_lists() {
        let list = BraggList {
            radius: 100.0,
            threshold: 1e-3,
            peaks: vec![],
        };
        let svg = bragg_svg(&list, 5.0);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(!svg.contains("circle"));
    }

    #[test]
    fn svg_disc_area_scales_with_intensity() {
        let list = BraggList {
            radius: 100.0,
            threshold: 1e-3,
            peaks: vec![
                BraggPeak {
                    k: vec![0.0],
                    intensity: 4.0,
                    phase: 0.0,
                },
                BraggPeak {
                    k: vec![1.0],
                    intensity: 1.0,
                    phase: 0.0,
                },
            ],
        };
        let svg = bragg_svg(&list, 2.0);
        // radii 12 and 6: area ratio 4
        assert!(svg.contains("r=\"1.2000000000000000e1\""));
        assert!(svg.contains("r=\"6.0000000000000000e0\""));
    }

    #[test]
    fn spectrum_csv_parses_back() {
        let list = BraggList {
            radius: 50.0,
            threshold: 1e-4,
            peaks: vec![BraggPeak {
                k: vec![1.0, -0.5],
                intensity: 0.25,
                phase: 0.1,
            }],
        };
        let csv = bragg_to_csv(&list);
        let rows = parse_spectrum_csv(&csv).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].0, vec![1.0, -0.5]);
        assert!((rows[0].1 - 0.25).abs() < 1e-15);
    }
}
