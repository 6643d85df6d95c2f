//! Command-line front end: argument parsing, dispatch and artifact output.
//!
//! Every command writes `<name>.csv` and `<name>.json` into the output
//! directory; the JSON embeds the parsed configuration next to the result.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::census;
use crate::energy;
use crate::error::{Error, Result};
use crate::exact_angles::AngleKey;
use crate::lattice::{self, LatticePointSet};
use crate::oscillatory;
use crate::scaling::{self, ScalingReport, Settings};
use crate::spectrum;

pub const OUT_DIR_ENV: &str = "REPANGLES_OUT";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

/// A non-negative rational written `p/q` or `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction(pub Ratio<u64>);

impl FromStr for Fraction {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (p, q) = s.split_once('/').unwrap_or((s, "1"));
        let p: u64 = p
            .trim()
            .parse()
            .map_err(|_| format!("bad numerator in {s:?}"))?;
        let q: u64 = q
            .trim()
            .parse()
            .map_err(|_| format!("bad denominator in {s:?}"))?;
        if q == 0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        Ok(Fraction(Ratio::new(p, q)))
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Fraction {
    fn signed(self) -> Result<Ratio<i64>> {
        let conv = |v: u64| i64::try_from(v).map_err(|_| Error::Overflow);
        Ok(Ratio::new(conv(*self.0.numer())?, conv(*self.0.denom())?))
    }
}

fn parse_key(s: &str) -> std::result::Result<AngleKey, String> {
    s.parse::<AngleKey>().map_err(|e| e.to_string())
}

fn ser_key<S: Serializer>(k: &Option<AngleKey>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match k {
        Some(k) => s.collect_str(k),
        None => s.serialize_none(),
    }
}

fn ser_fraction<S: Serializer>(k: &Option<Fraction>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match k {
        Some(k) => s.collect_str(k),
        None => s.serialize_none(),
    }
}

fn at_least(
    min: u64,
) -> impl Fn(&str) -> std::result::Result<u64, String> + Clone + Send + Sync + 'static {
    move |s: &str| {
        let v: u64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
        if v < min {
            return Err(format!("{v} is below the minimum {min}"));
        }
        Ok(v)
    }
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{v} is not a positive finite number")),
        Err(e) => Err(e.to_string()),
    }
}

fn cosine(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (-1.0..=1.0).contains(&v) => Ok(v),
        Ok(v) => Err(format!("{v} is outside [-1, 1]")),
        Err(e) => Err(e.to_string()),
    }
}

/// Exact angles among lattice triples: generation, census, energies,
/// angle spectra and scaling experiments.
#[derive(Debug, Parser, Serialize)]
#[command(name = "repangles", version, about)]
pub struct RunConfig {
    /// Output directory for CSV and JSON artifacts.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads for the compute kernels (default: all cores).
    #[arg(long, global = true, value_parser = at_least(1))]
    pub workers: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Write a point set as CSV.
    Generate {
        #[command(subcommand)]
        source: Source,
    },
    /// Exact angle census of a point set.
    Census {
        #[command(subcommand)]
        source: Source,
        #[command(flatten)]
        opts: CensusOpts,
    },
    /// Riesz energy of a point set after scaling.
    Energy {
        #[command(subcommand)]
        source: Source,
        #[command(flatten)]
        opts: EnergyOpts,
    },
    /// Windowed angle distribution of the thickened point set.
    Spectrum {
        #[command(subcommand)]
        source: Source,
        #[command(flatten)]
        opts: SpectrumOpts,
    },
    /// Fourier decay of the angle-shell measure along a ray.
    Decay(DecayOpts),
    /// Size-ladder experiments with log-log exponent fits.
    Scaling {
        #[command(subcommand)]
        experiment: Experiment,
        #[command(flatten)]
        opts: ScalingOpts,
    },
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// {1..side}^dim, optionally restricted to its middle block.
    Grid {
        #[arg(long, value_parser = at_least(2))]
        dim: u64,
        #[arg(long, value_parser = at_least(2))]
        side: u64,
        /// Keep only the middle block with side floor(fraction * side).
        #[arg(long)]
        #[serde(serialize_with = "ser_fraction")]
        block: Option<Fraction>,
    },
    /// Lattice points with squared norm r2.
    Sphere {
        #[arg(long, value_parser = at_least(2))]
        dim: u64,
        #[arg(long, value_parser = at_least(1))]
        r2: u64,
    },
    /// A point CSV previously written by `generate`.
    File { path: PathBuf },
}

impl Source {
    pub fn load(&self) -> Result<LatticePointSet> {
        match self {
            Source::Grid { dim, side, block } => {
                let g = lattice::generate_grid(*dim as usize, *side)?;
                match block {
                    Some(f) => lattice::middle_block(&g, f.0),
                    None => Ok(g),
                }
            }
            Source::Sphere { dim, r2 } => lattice::sphere_lattice(*dim as usize, *r2),
            Source::File { path } => {
                let f = File::open(path).map_err(|e| io_err(path, e))?;
                LatticePointSet::read_csv(f)
            }
        }
    }

    fn r2(&self) -> Option<u64> {
        match self {
            Source::Sphere { r2, .. } => Some(*r2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CensusOpts {
    /// Count right angles only.
    #[arg(long, global = true, conflicts_with = "key")]
    pub right: bool,
    /// Count a single angle key, e.g. `+:1/2`.
    #[arg(long, global = true, value_parser = parse_key)]
    #[serde(serialize_with = "ser_key")]
    pub key: Option<AngleKey>,
    /// Use the direct triple enumeration instead of the per-vertex path.
    #[arg(long, global = true)]
    pub brute: bool,
    /// Also report distinct dot products and angle keys.
    #[arg(long, global = true)]
    pub distinct: bool,
    /// Point-count cap (defaults: 600 direct, 40000 per-vertex).
    #[arg(long, global = true)]
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnergyOpts {
    #[arg(long, global = true, value_parser = positive_f64)]
    pub s: Option<f64>,
    /// Uniform scale applied to the points, `p/q`.
    #[arg(long, global = true)]
    #[serde(serialize_with = "ser_fraction")]
    pub scale: Option<Fraction>,
    /// Energy ceiling for the adaptability verdict.
    #[arg(long, global = true, value_parser = positive_f64)]
    pub threshold: Option<f64>,
    /// Report dyadic shell counts instead (sphere sources only).
    #[arg(long, global = true)]
    pub shells: bool,
    /// Report the sphere cross term instead (sphere sources only).
    #[arg(long, global = true, conflicts_with = "shells")]
    pub cross: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpectrumOpts {
    #[arg(long, global = true, value_parser = positive_f64)]
    pub s: Option<f64>,
    /// Window half-width; defaults to n^(-1/s).
    #[arg(long, global = true, value_parser = positive_f64)]
    pub eps: Option<f64>,
    /// Uniform scale, `p/q`; defaults to 1/(extent) so the set fits the unit cube.
    #[arg(long, global = true)]
    #[serde(serialize_with = "ser_fraction")]
    pub scale: Option<Fraction>,
    #[arg(long, global = true, default_value_t = 40)]
    pub bins: usize,
    /// Evaluate a single window centred at t.
    #[arg(long, global = true, value_parser = cosine)]
    pub t: Option<f64>,
    /// Report the supremum over t instead of a profile.
    #[arg(long, global = true, conflicts_with = "t")]
    pub sup: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecayOpts {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=3))]
    pub dim: u64,
    /// Shell centre.
    #[arg(long, value_parser = cosine, allow_hyphen_values = true)]
    pub t: f64,
    /// Shell half-width.
    #[arg(long, value_parser = positive_f64)]
    pub eps: f64,
    /// Quadrature step.
    #[arg(long, value_parser = positive_f64)]
    pub h: f64,
    /// Ray direction (xi, eta) with 2*dim comma-separated entries.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub ray: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScalingOpts {
    /// Slack on the exponent comparison.
    #[arg(long, global = true, value_parser = positive_f64)]
    pub slack: Option<f64>,
    /// Census point-count cap.
    #[arg(long, global = true)]
    pub cap: Option<usize>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Right-angle counts on grids (or another angle with --key).
    RightAngles {
        #[arg(long, value_parser = at_least(2))]
        dim: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        sides: Vec<u64>,
        #[arg(long, value_parser = parse_key)]
        #[serde(serialize_with = "ser_key")]
        key: Option<AngleKey>,
        /// Middle-block fraction for the sphere cross-check.
        #[arg(long)]
        #[serde(serialize_with = "ser_fraction")]
        block: Option<Fraction>,
    },
    /// Growth of nu at t = 0 with eps = n^(-1/s).
    Equitable {
        #[arg(long, value_parser = at_least(2))]
        dim: u64,
        #[arg(long, value_parser = positive_f64)]
        s: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        sides: Vec<u64>,
    },
    /// Largest single-angle repetition on adaptable grids.
    Repetition {
        #[arg(long, value_parser = at_least(2))]
        dim: u64,
        #[arg(long, value_parser = positive_f64)]
        s: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        sides: Vec<u64>,
        #[arg(long, value_parser = positive_f64)]
        threshold: Option<f64>,
    },
    /// Distinct angles on lattice spheres.
    SphereAngles {
        #[arg(long, value_parser = at_least(4))]
        dim: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        r2: Vec<u64>,
    },
    /// Dyadic shell counts on lattice spheres.
    Shells {
        #[arg(long, value_parser = clap::value_parser!(u64).range(4..=5))]
        dim: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        r2: Vec<u64>,
    },
    /// Sphere cross term over an r2 ladder.
    CrossTerm {
        #[arg(long, value_parser = at_least(2))]
        dim: u64,
        #[arg(long, value_parser = positive_f64)]
        s: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        r2: Vec<u64>,
    },
}

/// Parses `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> std::result::Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    RunConfig::try_parse_from(argv)
}

fn io_err(path: &Path, e: impl fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Outcome of a dispatched command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: String,
    pub pass: bool,
    pub csv: PathBuf,
    pub json: PathBuf,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

struct Artifacts<'a> {
    config: &'a RunConfig,
}

impl Artifacts<'_> {
    fn emit<R: Serialize>(
        &self,
        name: &str,
        pass: bool,
        result: &R,
        csv: impl FnOnce(&mut dyn Write) -> Result<()>,
    ) -> Result<Outcome> {
        let dir = &self.config.out;
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let csv_path = dir.join(format!("{name}.csv"));
        let json_path = dir.join(format!("{name}.json"));

        let f = File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
        let mut w = BufWriter::new(f);
        csv(&mut w)?;
        w.flush().map_err(|e| io_err(&csv_path, e))?;

        #[derive(Serialize)]
        struct Envelope<'a, R> {
            config: &'a RunConfig,
            pass: bool,
            result: &'a R,
        }
        let f = File::create(&json_path).map_err(|e| io_err(&json_path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(
            &mut w,
            &Envelope {
                config: self.config,
                pass,
                result,
            },
        )
        .map_err(|e| io_err(&json_path, e))?;
        writeln!(w)
            .and_then(|_| w.flush())
            .map_err(|e| io_err(&json_path, e))?;

        Ok(Outcome {
            name: name.to_string(),
            pass,
            csv: csv_path,
            json: json_path,
        })
    }
}

/// Runs the configured command on a pool of the requested size.
pub fn dispatch(config: &RunConfig) -> Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w as usize);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Range(format!("--workers: {e}")))?;
    pool.install(|| run(config))
}

fn run(config: &RunConfig) -> Result<Outcome> {
    let art = Artifacts { config };
    match &config.command {
        Command::Generate { source } => {
            let pts = source.load()?;
            #[derive(Serialize)]
            struct Summary {
                dim: usize,
                kind: &'static str,
                n: usize,
            }
            let summary = Summary {
                dim: pts.dim(),
                kind: pts.kind().label(),
                n: pts.len(),
            };
            art.emit("points", true, &summary, |w| pts.write_csv(w))
        }
        Command::Census { source, opts } => run_census(&art, source, opts),
        Command::Energy { source, opts } => run_energy(&art, source, opts),
        Command::Spectrum { source, opts } => run_spectrum(&art, source, opts),
        Command::Decay(opts) => {
            let grid = oscillatory::build_shell_grid(opts.dim as usize, opts.t, opts.eps, opts.h)?;
            let fit = oscillatory::decay_fit(&grid, &opts.ray, &opts.lambdas)?;
            art.emit("decay", true, &fit, |w| fit.write_csv(w))
        }
        Command::Scaling { experiment, opts } => {
            let report = run_experiment(experiment, opts)?;
            art.emit(&report.name.clone(), report.pass, &report, |w| {
                report.write_csv(w)
            })
        }
    }
}

fn run_census(art: &Artifacts<'_>, source: &Source, opts: &CensusOpts) -> Result<Outcome> {
    let pts = source.load()?;
    let single = if opts.right {
        Some(AngleKey::RIGHT)
    } else {
        opts.key
    };
    if let Some(key) = single {
        let count = match (opts.brute, opts.cap) {
            (true, cap) => {
                census::brute_force_census_with_cap(&pts, cap.unwrap_or(census::DEFAULT_BRUTE_CAP))?
                    .count(&key)
            }
            (false, cap) => {
                let cap = cap.unwrap_or(census::DEFAULT_VERTEX_CAP);
                if key.is_right() {
                    census::count_right_with_cap(&pts, cap)?
                } else {
                    census::count_key_with_cap(&pts, &key, cap)?
                }
            }
        };
        #[derive(Serialize)]
        struct Single {
            n_points: usize,
            total: u128,
            key: String,
            count: u64,
        }
        let result = Single {
            n_points: pts.len(),
            total: census::total_configurations(pts.len()),
            key: key.to_string(),
            count,
        };
        return art.emit("census", true, &result, |w| {
            writeln!(w, "angle_key,count\n{key},{count}").map_err(|e| Error::Parse(e.to_string()))
        });
    }

    let report = if opts.brute {
        census::brute_force_census_with_cap(&pts, opts.cap.unwrap_or(census::DEFAULT_BRUTE_CAP))?
    } else {
        census::vertex_census_with_cap(&pts, opts.cap.unwrap_or(census::DEFAULT_VERTEX_CAP))?
    };
    #[derive(Serialize)]
    struct Full<'a> {
        summary: census::CensusSummary,
        distinct: Option<census::DistinctAngles>,
        counts: &'a census::CensusReport,
    }
    let distinct = if opts.distinct {
        Some(census::distinct_angles(&pts)?)
    } else {
        None
    };
    let pass = report.sum_counts() == report.total;
    let full = Full {
        summary: report.summary(),
        distinct,
        counts: &report,
    };
    art.emit("census", pass, &full, |w| report.write_csv(w))
}

fn need_sphere(source: &Source, flag: &str) -> Result<u64> {
    source
        .r2()
        .ok_or_else(|| Error::Range(format!("{flag} needs a sphere source")))
}

fn run_energy(art: &Artifacts<'_>, source: &Source, opts: &EnergyOpts) -> Result<Outcome> {
    let pts = source.load()?;
    if opts.shells {
        let r2 = need_sphere(source, "--shells")?;
        let rep = energy::shell_counts(&pts, r2)?;
        return art.emit("shells", true, &rep, |w| rep.write_csv(w));
    }
    let s = opts
        .s
        .ok_or_else(|| Error::Range("--s is required".into()))?;
    if opts.cross {
        let r2 = need_sphere(source, "--cross")?;
        let value = energy::cross_term(&pts, r2, s)?;
        #[derive(Serialize)]
        struct Cross {
            r2: u64,
            s: f64,
            value: f64,
        }
        let c = Cross { r2, s, value };
        return art.emit("cross_term", true, &c, |w| {
            writeln!(w, "r2,s,value\n{r2},{s},{value}").map_err(|e| Error::Parse(e.to_string()))
        });
    }
    let scale = match opts.scale {
        Some(f) => f.signed()?,
        None => Ratio::from_integer(1),
    };
    let threshold = opts.threshold.unwrap_or(energy::DEFAULT_ENERGY_THRESHOLD);
    let rep = energy::riesz_energy_with_threshold(&pts, s, scale, threshold)?;
    art.emit("energy", true, &rep, |w| {
        writeln!(
            w,
            "s,value,min_separation,adaptable,n\n{},{},{},{},{}",
            rep.s, rep.value, rep.min_separation, rep.adaptable, rep.n
        )
        .map_err(|e| Error::Parse(e.to_string()))
    })
}

fn unit_scale(pts: &LatticePointSet) -> Result<Ratio<i64>> {
    let (lo, hi) = pts
        .bounding_box()
        .ok_or_else(|| Error::Empty("point set".into()))?;
    let extent = lo.iter().zip(&hi).map(|(a, b)| b - a).max().unwrap_or(0);
    Ok(Ratio::new(1, extent.max(1)))
}

fn run_spectrum(art: &Artifacts<'_>, source: &Source, opts: &SpectrumOpts) -> Result<Outcome> {
    let pts = source.load()?;
    let s = opts
        .s
        .ok_or_else(|| Error::Range("--s is required".into()))?;
    let scale = match opts.scale {
        Some(f) => f.signed()?,
        None => unit_scale(&pts)?,
    };
    let measure = lattice::thicken(&pts, s, scale)?;
    let eps = opts
        .eps
        .unwrap_or_else(|| (pts.len() as f64).powf(-1.0 / s));

    #[derive(Serialize)]
    struct Point {
        eps: f64,
        t: f64,
        nu: f64,
    }
    if let Some(t) = opts.t {
        let p = Point {
            eps,
            t,
            nu: spectrum::nu_epsilon(&measure, t, eps)?,
        };
        return art.emit("spectrum", true, &p, |w| {
            writeln!(w, "t,nu\n{},{}", p.t, p.nu).map_err(|e| Error::Parse(e.to_string()))
        });
    }
    if opts.sup {
        let (t, nu) = spectrum::equitable_sup(&measure, eps)?;
        let p = Point { eps, t, nu };
        return art.emit("spectrum", true, &p, |w| {
            writeln!(w, "t,nu\n{},{}", p.t, p.nu).map_err(|e| Error::Parse(e.to_string()))
        });
    }
    let hist = spectrum::nu_profile(&measure, eps, opts.bins)?;
    art.emit("spectrum", true, &hist, |w| hist.write_csv(w))
}

fn run_experiment(experiment: &Experiment, opts: &ScalingOpts) -> Result<ScalingReport> {
    let mut settings = Settings {
        slack: opts.slack,
        cap: opts.cap,
        ..Settings::default()
    };
    match experiment {
        Experiment::RightAngles {
            dim,
            sides,
            key,
            block,
        } => {
            settings.block_fraction = block.map(|f| f.0);
            match key {
                Some(k) => scaling::run_angle_scaling(*dim as usize, sides, *k, &settings),
                None => scaling::run_right_angle_scaling(*dim as usize, sides, &settings),
            }
        }
        Experiment::Equitable { dim, s, sides } => {
            scaling::run_equitable_violation(*dim as usize, *s, sides, &settings)
        }
        Experiment::Repetition {
            dim,
            s,
            sides,
            threshold,
        } => {
            settings.energy_threshold = *threshold;
            scaling::run_repetition_bound(*dim as usize, *s, sides, &settings)
        }
        Experiment::SphereAngles { dim, r2 } => {
            scaling::run_sphere_angle_bound(*dim as usize, r2, &settings)
        }
        Experiment::Shells { dim, r2 } => scaling::run_shell_bound(*dim as usize, r2, &settings),
        Experiment::CrossTerm { dim, s, r2 } => {
            scaling::run_cross_term(*dim as usize, *s, r2, &settings)
        }
    }
}

/// Full CLI entry point returning the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&config) {
        Ok(outcome) => {
            println!(
                "{}: {} ({}, {})",
                outcome.name,
                if outcome.pass { "pass" } else { "FAIL" },
                outcome.csv.display(),
                outcome.json.display()
            );
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
