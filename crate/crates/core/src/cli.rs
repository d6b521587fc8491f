//! The command-line surface: config-driven generation and analysis runs
//! with CSV/JSON/SVG outputs and a manifest per run.
//!
//! Every run resolves its flags into a [`RunConfig`], hashes the canonical
//! JSON form of that config into the manifest, and emits byte-reproducible
//! data files (the manifest additionally records wall-clock times, which
//! are informational and not covered by the determinism contract).
//!
//! Exit codes: 0 success, 2 config error, 3 data-shape error, 4 numerical
//! acceptance failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::autocorr::{autocorrelation, eberlein_ladder, weighted_autocorrelation};
use crate::cps::{model_set_sample_named, ModelSetSpec};
use crate::diffraction::{
    bragg_scan, bragg_scan_grid, closed_form_lattice, default_threshold, BraggList, Source,
};
use crate::error::{Error, Result};
use crate::factors::{factor_diffraction_gain, sliding_block, BlockMap};
use crate::generators::{
    substitution_chain_capped, ChainSample, CrystallographicSpec, LatticeSpec,
    SubstitutionConfig, SubstitutionSystem, DEFAULT_POINT_CAP,
};
use crate::io;
use crate::numeric::fmt_float;
use crate::pointset::PointSample;
use crate::quasiperiodic::{parseval_check, qp_diffraction, QpConfig, QuasiperiodicFunction};

/// What generates the point set (or function) of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// A named preset: `integers`, `fibonacci`, `thue-morse`,
    /// `period-doubling`, `fibonacci-cps`, `ammann-beenker`.
    Preset(String),
    Lattice(LatticeSpec),
    Crystallographic(CrystallographicSpec),
    Substitution(SubstitutionConfig),
    Cps(ModelSetSpec),
    Qp(QpConfig),
}

/// The resolved configuration of one run; its canonical JSON form is
/// hashed into the manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub generator: GeneratorSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub format: String,
    /// `a-positions` (default) or `pm-one` for substitution chains.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    /// `numeric` (default) or `closed` for the diffract command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// Letter whose positions a chain generator exports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub letter: Option<String>,
    /// Optional block map for the factor command (difference rule default).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_map: Option<BlockMap>,
    /// Internal-space truncation of dual-lattice candidate lists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub internal_bound: Option<f64>,
    pub cap: usize,
}

/// Per-run metadata: config hash, tool version, stage timings, outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub stages: Vec<(String, f64)>,
    pub outputs: Vec<String>,
}

#[derive(Parser)]
#[command(name = "quasidiff", version, about = "aperiodic point sets and their diffraction")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a point sample and write it as CSV/JSON.
    Generate(CommonArgs),
    /// Estimate the autocorrelation (single radius or a radii ladder).
    Autocorr(CommonArgs),
    /// Scan Bragg amplitudes and write the peak list plus an SVG plot.
    Diffract(CommonArgs),
    /// Compare the diffraction of a substitution chain with its sliding
    /// block image.
    Factor(CommonArgs),
    /// Quasiperiodic spectrum and Parseval balance.
    Qp(CommonArgs),
    /// Compare two spectrum CSV files against a tolerance.
    Compare(CompareArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Named generator preset.
    #[arg(long)]
    preset: Option<String>,
    /// JSON config file (a generator spec, or a partial run config with a
    /// "generator" field).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    radius: Option<f64>,
    /// Increasing radii for a convergence ladder (comma-separated).
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[arg(long)]
    zmax: Option<f64>,
    #[arg(long)]
    kmax: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// csv or json for the data files.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Worker threads (default: rayon's default).
    #[arg(long)]
    threads: Option<usize>,
    /// Point-count cap.
    #[arg(long)]
    cap: Option<usize>,
    /// Chain weighting: a-positions or pm-one.
    #[arg(long)]
    weights: Option<String>,
    /// diffract method: numeric or closed.
    #[arg(long)]
    method: Option<String>,
    /// Letter exported from chain generators.
    #[arg(long)]
    letter: Option<String>,
    /// Internal-space bound for dual-lattice candidates.
    #[arg(long)]
    internal_bound: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    /// First spectrum CSV.
    a: PathBuf,
    /// Second spectrum CSV.
    b: PathBuf,
    #[arg(long, default_value_t = 1e-2)]
    tolerance: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version via "errors" with success status
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = match &cli.command {
        Cmd::Generate(a) | Cmd::Autocorr(a) | Cmd::Diffract(a) | Cmd::Factor(a) | Cmd::Qp(a) => {
            a.threads
        }
        Cmd::Compare(a) => a.threads,
    };
    let body = || match cli.command {
        Cmd::Generate(ref a) => dispatch("generate", a),
        Cmd::Autocorr(ref a) => dispatch("autocorr", a),
        Cmd::Diffract(ref a) => dispatch("diffract", a),
        Cmd::Factor(ref a) => dispatch("factor", a),
        Cmd::Qp(ref a) => dispatch("qp", a),
        Cmd::Compare(ref a) => cmd_compare(&a.a, &a.b, a.tolerance, &a.out),
    };
    let outcome = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build();
            match pool {
                Ok(p) => p.install(body),
                Err(e) => {
                    eprintln!("error: cannot build thread pool: {e}");
                    return 2;
                }
            }
        }
        None => body(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ShapeMismatch(_) | Error::DimensionMismatch { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn dispatch(command: &str, args: &CommonArgs) -> Result<i32> {
    let cfg = resolve_config(command, args)?;
    std::fs::create_dir_all(&args.out)?;
    let _outputs = match command {
        "generate" => cmd_generate(&cfg, &args.out)?,
        "autocorr" => cmd_autocorr(&cfg, &args.out)?,
        "diffract" => cmd_diffract(&cfg, &args.out)?,
        "factor" => cmd_factor(&cfg, &args.out)?,
        "qp" => cmd_qp(&cfg, &args.out)?,
        other => return Err(Error::Config(format!("unknown command {other}"))),
    };
    Ok(0)
}

/// Known preset names, so config errors surface before any generation.
const PRESETS: [&str; 6] = [
    "integers",
    "fibonacci",
    "thue-morse",
    "period-doubling",
    "fibonacci-cps",
    "ammann-beenker",
];

fn resolve_config(command: &str, args: &CommonArgs) -> Result<RunConfig> {
    // the generator comes from --preset, --config, or a config file's
    // generator field; flags override config file values
    let mut file_cfg: Option<Value> = None;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        file_cfg = Some(serde_json::from_str(&text)?);
    }
    let generator = if let Some(name) = &args.preset {
        if !PRESETS.contains(&name.as_str()) {
            return Err(Error::UnknownPreset(name.clone()));
        }
        GeneratorSpec::Preset(name.clone())
    } else if let Some(v) = &file_cfg {
        let gen_value = v.get("generator").cloned().unwrap_or_else(|| v.clone());
        detect_generator(&gen_value)?
    } else {
        return Err(Error::Config(
            "no generator: pass --preset or --config".into(),
        ));
    };
    let from_file = |key: &str| -> Option<Value> {
        file_cfg.as_ref().and_then(|v| v.get(key)).cloned()
    };
    let f64_of = |v: Value| v.as_f64();

    let cfg = RunConfig {
        command: command.to_string(),
        generator,
        radius: args.radius.or_else(|| from_file("radius").and_then(f64_of)),
        radii: args.radii.clone().or_else(|| {
            from_file("radii").and_then(|v| {
                v.as_array()
                    .map(|a| a.iter().filter_map(Value::as_f64).collect())
            })
        }),
        zmax: args.zmax.or_else(|| from_file("zmax").and_then(f64_of)),
        kmax: args.kmax.or_else(|| from_file("kmax").and_then(f64_of)),
        threshold: args
            .threshold
            .or_else(|| from_file("threshold").and_then(f64_of)),
        format: args.format.clone(),
        weights: args
            .weights
            .clone()
            .or_else(|| from_file("weights").and_then(|v| v.as_str().map(String::from))),
        method: args.method.clone(),
        letter: args.letter.clone(),
        block_map: from_file("block_map")
            .map(serde_json::from_value)
            .transpose()?,
        internal_bound: args
            .internal_bound
            .or_else(|| from_file("internal_bound").and_then(f64_of)),
        cap: args.cap.unwrap_or(DEFAULT_POINT_CAP),
    };
    if !["csv", "json", "svg"].contains(&cfg.format.as_str()) {
        return Err(Error::Config(format!("unknown format {:?}", cfg.format)));
    }
    if let Some(radii) = &cfg.radii {
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneRadii);
        }
    }
    Ok(cfg)
}

fn detect_generator(v: &Value) -> Result<GeneratorSpec> {
    if let Ok(g) = serde_json::from_value::<GeneratorSpec>(v.clone()) {
        return Ok(g);
    }
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Config("generator spec must be an object".into()))?;
    if obj.contains_key("alphabet") {
        Ok(GeneratorSpec::Substitution(serde_json::from_value(
            v.clone(),
        )?))
    } else if obj.contains_key("d_phys") {
        Ok(GeneratorSpec::Cps(serde_json::from_value(v.clone())?))
    } else if obj.contains_key("terms") {
        Ok(GeneratorSpec::Qp(serde_json::from_value(v.clone())?))
    } else if obj.contains_key("lattice") {
        Ok(GeneratorSpec::Crystallographic(serde_json::from_value(
            v.clone(),
        )?))
    } else if obj.contains_key("basis") {
        Ok(GeneratorSpec::Lattice(serde_json::from_value(v.clone())?))
    } else {
        Err(Error::Config(
            "cannot identify the generator kind from the config".into(),
        ))
    }
}

/// A generated data set: the exported point sample, plus the chain and
/// signed comb when the generator is a substitution rule.
pub struct BuiltSet {
    pub sample: PointSample,
    pub chain: Option<ChainSample>,
    pub signed_comb: Option<WeightedCombWithRadius>,
}

pub struct WeightedCombWithRadius {
    pub comb: crate::pointset::WeightedComb,
    pub radius: f64,
}

/// Realizes the generator at the requested radius.
pub fn build_set(cfg: &RunConfig, radius: f64) -> Result<BuiltSet> {
    let spec = &cfg.generator;
    match spec {
        GeneratorSpec::Preset(name) => build_preset(cfg, name, radius),
        GeneratorSpec::Lattice(spec) => {
            check_cap(spec.density()?, 1, radius, cfg.cap)?;
            Ok(BuiltSet {
                sample: spec.sample(radius)?,
                chain: None,
                signed_comb: None,
            })
        }
        GeneratorSpec::Crystallographic(spec) => {
            check_cap(spec.density()?, spec.lattice.dim(), radius, cfg.cap)?;
            Ok(BuiltSet {
                sample: spec.sample(radius)?,
                chain: None,
                signed_comb: None,
            })
        }
        GeneratorSpec::Cps(spec) => {
            let covol = nalgebra::DMatrix::from_fn(spec.scheme.total_dim(), spec.scheme.total_dim(), |i, j| {
                spec.scheme.basis[i][j]
            })
            .determinant()
            .abs();
            if covol > 0.0 {
                check_cap(
                    spec.window.volume() / covol,
                    spec.scheme.d_phys,
                    radius,
                    cfg.cap,
                )?;
            }
            Ok(BuiltSet {
                sample: model_set_sample_named(spec, radius, "cps")?,
                chain: None,
                signed_comb: None,
            })
        }
        GeneratorSpec::Substitution(sub) => {
            let sys = SubstitutionSystem::from_config(sub, "custom")?;
            build_chain(cfg, &sys, radius)
        }
        GeneratorSpec::Qp(_) => Err(Error::Config(
            "quasiperiodic generators only support the qp command".into(),
        )),
    }
}

fn check_cap(density: f64, dim: usize, radius: f64, cap: usize) -> Result<()> {
    let expected = density * crate::numeric::ball_volume(dim, radius);
    if expected > cap as f64 {
        return Err(Error::CapExceeded {
            count: expected as usize,
            cap,
        });
    }
    Ok(())
}

fn build_preset(cfg: &RunConfig, name: &str, radius: f64) -> Result<BuiltSet> {
    match name {
        "integers" => {
            let spec = LatticeSpec::new(vec![vec![1.0]])?;
            check_cap(1.0, 1, radius, cfg.cap)?;
            Ok(BuiltSet {
                sample: spec.sample(radius)?,
                chain: None,
                signed_comb: None,
            })
        }
        "fibonacci-cps" | "ammann-beenker" => {
            let spec = ModelSetSpec::preset(name)?;
            Ok(BuiltSet {
                sample: model_set_sample_named(&spec, radius, name)?,
                chain: None,
                signed_comb: None,
            })
        }
        "fibonacci" | "thue-morse" | "period-doubling" => {
            let sys = SubstitutionSystem::preset(name)?;
            build_chain(cfg, &sys, radius)
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Iterates a substitution system until the chain covers the requested
/// radius, then exports letter positions (or the signed comb).
fn build_chain(cfg: &RunConfig, sys: &SubstitutionSystem, radius: f64) -> Result<BuiltSet> {
    let mut n = 1;
    let chain = loop {
        let chain = substitution_chain_capped(sys, n, cfg.cap)?;
        if chain.balanced_radius() >= radius {
            break chain;
        }
        if n > 64 {
            return Err(Error::Degenerate(
                "substitution iteration did not reach the requested radius".into(),
            ));
        }
        n += 1;
    };
    let letter = cfg
        .letter
        .clone()
        .unwrap_or_else(|| sys.alphabet()[0].clone());
    let sample = chain.letter_positions(&letter)?.restrict(radius)?;
    let signed_comb = match cfg.weights.as_deref() {
        Some("pm-one") => {
            if sys.alphabet().len() != 2 {
                return Err(Error::Config(
                    "pm-one weights need a two-letter alphabet".into(),
                ));
            }
            let w = BTreeMap::from([
                (sys.alphabet()[0].clone(), Complex64::new(1.0, 0.0)),
                (sys.alphabet()[1].clone(), Complex64::new(-1.0, 0.0)),
            ]);
            let comb = chain.weighted_comb(&w)?;
            // restrict atoms to the export radius
            let mut positions = Vec::new();
            let mut ws = Vec::new();
            for (p, w) in comb.atoms() {
                if p[0].abs() <= radius {
                    positions.push(p[0]);
                    ws.push(w);
                }
            }
            Some(WeightedCombWithRadius {
                comb: crate::pointset::WeightedComb::new(1, positions, ws)?,
                radius,
            })
        }
        Some("a-positions") | None => None,
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown weights {other:?}; use a-positions or pm-one"
            )))
        }
    };
    Ok(BuiltSet {
        sample,
        chain: Some(chain),
        signed_comb,
    })
}

struct StageClock {
    stages: Vec<(String, f64)>,
    last: Instant,
}

impl StageClock {
    fn new() -> Self {
        Self {
            stages: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.stages
            .push((name.to_string(), (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

fn write_manifest(
    cfg_value: &Value,
    out_dir: &Path,
    stages: Vec<(String, f64)>,
    outputs: Vec<String>,
) -> Result<()> {
    let manifest = RunManifest {
        config_hash: io::config_hash(cfg_value),
        version: env!("CARGO_PKG_VERSION").to_string(),
        stages,
        outputs,
    };
    let text = serde_json::to_string_pretty(&serde_json::to_value(&manifest)?)?;
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(())
}

fn write_file(out_dir: &Path, name: &str, content: &str) -> Result<String> {
    std::fs::write(out_dir.join(name), content)?;
    Ok(name.to_string())
}

pub fn cmd_generate(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<String>> {
    let radius = cfg
        .radius
        .ok_or_else(|| Error::Config("generate needs --radius".into()))?;
    let mut clock = StageClock::new();
    let set = build_set(cfg, radius)?;
    clock.lap("generate");
    let mut outputs = Vec::new();
    match cfg.format.as_str() {
        "json" => {
            let v = io::sample_to_json(&set.sample);
            outputs.push(write_file(
                out_dir,
                "sample.json",
                &serde_json::to_string_pretty(&v)?,
            )?);
        }
        _ => {
            outputs.push(write_file(
                out_dir,
                "sample.csv",
                &io::sample_to_csv(&set.sample),
            )?);
        }
    }
    clock.lap("write");
    write_manifest(
        &serde_json::to_value(cfg)?,
        out_dir,
        clock.stages,
        outputs.clone(),
    )?;
    Ok(outputs)
}

pub fn cmd_autocorr(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<String>> {
    let zmax = cfg.zmax.unwrap_or(10.0);
    let mut clock = StageClock::new();
    let mut outputs = Vec::new();
    if let Some(radii) = cfg.radii.clone().filter(|r| r.len() >= 2) {
        let gen = |r: f64| build_set(cfg, r).map(|s| s.sample);
        let ladder = eberlein_ladder(&gen, &radii, zmax, 1e-2)?;
        clock.lap("ladder");
        outputs.push(write_file(out_dir, "ladder.csv", &io::ladder_to_csv(&ladder))?);
    } else {
        let radius = cfg
            .radius
            .ok_or_else(|| Error::Config("autocorr needs --radius or --radii".into()))?;
        let set = build_set(cfg, radius)?;
        clock.lap("generate");
        let est = match &set.signed_comb {
            Some(wc) => weighted_autocorrelation(&wc.comb, wc.radius, zmax)?,
            None => autocorrelation(&set.sample, zmax)?,
        };
        clock.lap("autocorrelation");
        match cfg.format.as_str() {
            "json" => {
                let v = io::comb_to_json(&est.comb);
                outputs.push(write_file(
                    out_dir,
                    "autocorr.json",
                    &serde_json::to_string_pretty(&v)?,
                )?);
            }
            _ => {
                outputs.push(write_file(
                    out_dir,
                    "autocorr.csv",
                    &io::comb_to_csv(&est.comb, "z", "eta_re", "eta_im"),
                )?);
            }
        }
    }
    clock.lap("write");
    write_manifest(
        &serde_json::to_value(cfg)?,
        out_dir,
        clock.stages,
        outputs.clone(),
    )?;
    Ok(outputs)
}

/// Candidate wave vectors for a generator: the dual lattice for periodic
/// sets, projected dual-lattice points for model sets, dyadic rationals for
/// substitution chains.
pub fn candidate_list(cfg: &RunConfig, kmax: f64) -> Result<Vec<Vec<f64>>> {
    let internal_bound = cfg.internal_bound.unwrap_or(8.0);
    let dual_of = |lat: &LatticeSpec| -> Result<Vec<Vec<f64>>> {
        Ok(lat
            .dual()?
            .sample(kmax)?
            .points()
            .map(|p| p.to_vec())
            .collect())
    };
    match &cfg.generator {
        GeneratorSpec::Preset(name) => match name.as_str() {
            "integers" => dual_of(&LatticeSpec::new(vec![vec![1.0]])?),
            "fibonacci-cps" | "ammann-beenker" => {
                let spec = ModelSetSpec::preset(name)?;
                Ok(spec
                    .scheme
                    .dual_candidates(kmax, internal_bound)?
                    .into_iter()
                    .map(|(kp, _)| kp)
                    .collect())
            }
            // the geometric fibonacci chain carries the same Bragg module
            // as its cut-and-project realization
            "fibonacci" => {
                let spec = ModelSetSpec::preset("fibonacci-cps")?;
                Ok(spec
                    .scheme
                    .dual_candidates(kmax, internal_bound)?
                    .into_iter()
                    .map(|(kp, _)| kp)
                    .collect())
            }
            "thue-morse" | "period-doubling" => Ok(dyadic_candidates(kmax, 4)),
            other => Err(Error::UnknownPreset(other.to_string())),
        },
        GeneratorSpec::Lattice(lat) => dual_of(lat),
        GeneratorSpec::Crystallographic(spec) => dual_of(&spec.lattice),
        GeneratorSpec::Cps(spec) => Ok(spec
            .scheme
            .dual_candidates(kmax, internal_bound)?
            .into_iter()
            .map(|(kp, _)| kp)
            .collect()),
        GeneratorSpec::Substitution(_) => Ok(dyadic_candidates(kmax, 4)),
        GeneratorSpec::Qp(_) => Err(Error::Config(
            "quasiperiodic generators use the qp command".into(),
        )),
    }
}

/// Dyadic rationals `m / 2^j`, `j <= depth`, within `|k| <= kmax`.
pub fn dyadic_candidates(kmax: f64, depth: u32) -> Vec<Vec<f64>> {
    let denom = f64::powi(2.0, depth as i32);
    let mmax = (kmax * denom).floor() as i64;
    (-mmax..=mmax).map(|m| vec![m as f64 / denom]).collect()
}

pub fn cmd_diffract(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<String>> {
    let radius = cfg
        .radius
        .ok_or_else(|| Error::Config("diffract needs --radius".into()))?;
    let kmax = cfg.kmax.unwrap_or(5.0);
    let mut clock = StageClock::new();
    let mut outputs = Vec::new();

    if cfg.method.as_deref() == Some("closed") {
        let spectrum = match &cfg.generator {
            GeneratorSpec::Preset(name) if name == "integers" => {
                let lat = LatticeSpec::new(vec![vec![1.0]])?;
                closed_form_lattice(&CrystallographicSpec::new(lat, vec![vec![0.0]])?, kmax)?
            }
            GeneratorSpec::Lattice(lat) => closed_form_lattice(
                &CrystallographicSpec::new(lat.clone(), vec![vec![0.0; lat.dim()]])?,
                kmax,
            )?,
            GeneratorSpec::Crystallographic(spec) => closed_form_lattice(spec, kmax)?,
            _ => {
                return Err(Error::Config(
                    "closed-form diffraction needs a lattice or crystallographic generator"
                        .into(),
                ))
            }
        };
        clock.lap("closed-form");
        outputs.push(write_file(
            out_dir,
            "spectrum.csv",
            &io::spectrum_to_csv(&spectrum),
        )?);
        clock.lap("write");
        write_manifest(
            &serde_json::to_value(cfg)?,
            out_dir,
            clock.stages,
            outputs.clone(),
        )?;
        return Ok(outputs);
    }

    let set = build_set(cfg, radius)?;
    clock.lap("generate");
    let source = match &set.signed_comb {
        Some(wc) => Source::Weighted {
            comb: &wc.comb,
            radius: wc.radius,
        },
        None => Source::Points(&set.sample),
    };
    let threshold = cfg
        .threshold
        .unwrap_or_else(|| default_threshold(set.sample.density().max(1e-6)));
    let list = if cfg.method.as_deref() == Some("grid") {
        bragg_scan_grid(&source, -kmax, kmax, threshold)?
    } else {
        let candidates = candidate_list(cfg, kmax)?;
        bragg_scan(&source, &candidates, threshold)?
    };
    clock.lap("scan");

    match cfg.format.as_str() {
        "json" => {
            let peaks: Vec<Value> = list
                .peaks
                .iter()
                .map(|p| json!({"k": p.k, "intensity": p.intensity, "phase": p.phase}))
                .collect();
            let v = json!({"radius": list.radius, "threshold": list.threshold, "peaks": peaks});
            outputs.push(write_file(
                out_dir,
                "bragg.json",
                &serde_json::to_string_pretty(&v)?,
            )?);
        }
        _ => {
            outputs.push(write_file(out_dir, "bragg.csv", &io::bragg_to_csv(&list))?);
        }
    }
    outputs.push(write_file(
        out_dir,
        "bragg.svg",
        &io::bragg_svg(&list, kmax),
    )?);
    clock.lap("write");
    write_manifest(
        &serde_json::to_value(cfg)?,
        out_dir,
        clock.stages,
        outputs.clone(),
    )?;
    Ok(outputs)
}

pub fn cmd_factor(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<String>> {
    let radius = cfg
        .radius
        .ok_or_else(|| Error::Config("factor needs --radius".into()))?;
    let kmax = cfg.kmax.unwrap_or(4.0);
    let sys = match &cfg.generator {
        GeneratorSpec::Preset(name) => SubstitutionSystem::preset(name)?,
        GeneratorSpec::Substitution(sub) => SubstitutionSystem::from_config(sub, "custom")?,
        _ => {
            return Err(Error::Config(
                "the factor command needs a substitution generator".into(),
            ))
        }
    };
    let mut clock = StageClock::new();
    let set = build_set(cfg, radius)?;
    let chain = set
        .chain
        .as_ref()
        .ok_or_else(|| Error::Config("factor needs a chain generator".into()))?;
    let map = cfg.block_map.clone().unwrap_or_else(BlockMap::difference_rule);
    let image = sliding_block(chain, &map)?;
    clock.lap("generate");

    let letter = cfg
        .letter
        .clone()
        .unwrap_or_else(|| sys.alphabet()[0].clone());
    let r = radius.min(image.balanced_radius());
    let src = chain.letter_positions(&letter)?.restrict(r)?;
    let fac_letter = image.alphabet()[0].clone();
    let fac = image.letter_positions(&fac_letter)?.restrict(r)?;
    let threshold = cfg.threshold.unwrap_or(1e-3);
    let candidates = dyadic_candidates(kmax, 4);
    let report = factor_diffraction_gain(
        &Source::Points(&src),
        &Source::Points(&fac),
        &candidates,
        threshold,
    )?;
    clock.lap("scan");

    let mut outputs = Vec::new();
    outputs.push(write_file(
        out_dir,
        "source_bragg.csv",
        &io::bragg_to_csv(&report.source_peaks),
    )?);
    outputs.push(write_file(
        out_dir,
        "factor_bragg.csv",
        &io::bragg_to_csv(&report.factor_peaks),
    )?);
    let mut gain_csv = String::from("k1,intensity\n");
    for (k, i) in &report.gained {
        gain_csv.push_str(&format!("{},{}\n", fmt_float(k[0]), fmt_float(*i)));
    }
    outputs.push(write_file(out_dir, "factor_gain.csv", &gain_csv)?);
    clock.lap("write");
    write_manifest(
        &serde_json::to_value(cfg)?,
        out_dir,
        clock.stages,
        outputs.clone(),
    )?;
    Ok(outputs)
}

pub fn cmd_qp(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<String>> {
    let qp_cfg = match &cfg.generator {
        GeneratorSpec::Qp(q) => q.clone(),
        _ => {
            return Err(Error::Config(
                "the qp command needs a quasiperiodic generator config".into(),
            ))
        }
    };
    let u = QuasiperiodicFunction::from_config(&qp_cfg)?;
    let radius = cfg.radius.unwrap_or(1e3);
    let mut clock = StageClock::new();
    let spectrum = qp_diffraction(&u);
    let parseval = parseval_check(&u, radius)?;
    clock.lap("analyze");

    let mut outputs = Vec::new();
    outputs.push(write_file(
        out_dir,
        "qp_spectrum.csv",
        &io::qp_spectrum_to_csv(&spectrum),
    )?);
    let report = json!({
        "radius": parseval.radius,
        "exact_mass": parseval.exact_mass,
        "ball_average": parseval.ball_average,
        "deviation": parseval.deviation,
        "leakage_bound": parseval.leakage_bound,
        "total_mass": spectrum.total_mass,
    });
    outputs.push(write_file(
        out_dir,
        "parseval.json",
        &serde_json::to_string_pretty(&report)?,
    )?);
    clock.lap("write");
    write_manifest(
        &serde_json::to_value(cfg)?,
        out_dir,
        clock.stages,
        outputs.clone(),
    )?;
    Ok(outputs)
}

/// Compares two spectrum CSVs row by row. Returns process exit code 0 on
/// success, 4 when the deviation exceeds the tolerance (shape mismatches
/// surface as errors with exit code 3).
pub fn cmd_compare(a: &Path, b: &Path, tolerance: f64, out_dir: &Path) -> Result<i32> {
    std::fs::create_dir_all(out_dir)?;
    let rows_a = io::parse_spectrum_csv(&std::fs::read_to_string(a)?)?;
    let rows_b = io::parse_spectrum_csv(&std::fs::read_to_string(b)?)?;
    if rows_a.len() != rows_b.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows vs {} rows",
            rows_a.len(),
            rows_b.len()
        )));
    }
    let mut max_dev = 0.0f64;
    let mut sum_dev = 0.0f64;
    let mut table = String::new();
    let dim = rows_a.first().map(|r| r.0.len()).unwrap_or(1);
    for i in 1..=dim {
        table.push_str(&format!("k{i},"));
    }
    table.push_str("value_a,value_b,abs_dev\n");
    for ((ka, va), (kb, vb)) in rows_a.iter().zip(rows_b.iter()) {
        if ka.len() != kb.len() || crate::numeric::dist(ka, kb) > 1e-9 {
            return Err(Error::ShapeMismatch(format!(
                "k-grids disagree: {ka:?} vs {kb:?}"
            )));
        }
        let dev = (va - vb).abs();
        max_dev = max_dev.max(dev);
        sum_dev += dev;
        let mut cells: Vec<String> = ka.iter().map(|c| fmt_float(*c)).collect();
        cells.push(fmt_float(*va));
        cells.push(fmt_float(*vb));
        cells.push(fmt_float(dev));
        table.push_str(&cells.join(","));
        table.push('\n');
    }
    let mean_dev = sum_dev / rows_a.len().max(1) as f64;
    let pass = max_dev <= tolerance;
    std::fs::write(out_dir.join("deviation.csv"), &table)?;
    let summary = json!({
        "rows": rows_a.len(),
        "max_deviation": max_dev,
        "mean_deviation": mean_dev,
        "tolerance": tolerance,
        "pass": pass,
    });
    std::fs::write(
        out_dir.join("compare.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "compare: rows={} max={} mean={} tolerance={} -> {}",
        rows_a.len(),
        max_dev,
        mean_dev,
        tolerance,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { 0 } else { 4 })
}

/// Grid-scan variant of the diffract pipeline, exposed for callers that
/// need peak discovery without a candidate list (one-dimensional only).
pub fn diffract_grid(cfg: &RunConfig, lo: f64, hi: f64) -> Result<BraggList> {
    let radius = cfg
        .radius
        .ok_or_else(|| Error::Config("diffract needs a radius".into()))?;
    let set = build_set(cfg, radius)?;
    let threshold = cfg
        .threshold
        .unwrap_or_else(|| default_threshold(set.sample.density().max(1e-6)));
    bragg_scan_grid(&Source::Points(&set.sample), lo, hi, threshold)
}
