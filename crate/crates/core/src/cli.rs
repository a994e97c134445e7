//! Command-line front end.
//!
//! Settings come from flags, an optional config file (`key = value` lines or
//! a JSON object) and built-in defaults, in that order of precedence. Config
//! keys are the long flag names.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::cmv::FiniteCMV;
use crate::cocycle::{polynomials, transfer_identity_residual, SpectralPoint};
use crate::error::Error;
use crate::experiments::{
    base_point, ldt_deviation, localization, lyapunov_scaling, prufer_term_ldt, DeviationEvent,
    ExperimentPlan, LdtResult,
};
use crate::greens::{decay_profile, green_direct, green_modulus_formula, DecayProfile};
use crate::prufer;
use crate::sampling::{CorrelationSpectrum, TrigPolynomial};
use crate::torus::ToralAutomorphism;
use crate::verblunsky::{parse_base, VerblunskyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// CMV matrices sampled along hyperbolic toral orbits.
#[derive(Parser, Debug)]
#[command(
    name = "szego-lab",
    version,
    arg_required_else_help = true,
    after_help = "All angles are in radians and all logarithms are natural.\n\
                  Grids are comma lists (0.05,0.1,0.2) or start:stop:count.\n\
                  Config keys are the long flag names; flags override the file."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Lyapunov exponents against the λ²𝒥(η)/2 prediction over λ × η × N.
    Lyapunov,
    /// Sweep of the correlation spectral function 𝒥(η).
    Jspec,
    /// Large-deviation fractions along the N grid.
    Ldt,
    /// Green's function decay profile on [0, N].
    Green,
    /// Eigenvector localization inside the spectral window.
    Localize,
    /// Quick invariant suite; exits 1 on failure.
    Selftest,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// |(1/N)Σ Fₙ| > birkhoff-delta.
    Birkhoff,
    /// |L_N − λ²𝒥(η)/2| > threshold.
    Lyapunov,
    /// The four Prüfer expansion term families.
    Prufer,
}

#[derive(clap::Args, Debug, Default, Clone)]
pub struct Opts {
    /// Automorphism entries a11,a12,a21,a22.
    #[arg(long = "A", global = true, value_name = "MATRIX")]
    pub a: Option<String>,
    /// Sampling function "(k1,k2): re,im; ..." or a preset name.
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// Sampling-function preset: alpha0 or alpha1.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Coupling grid λ.
    #[arg(long, alias = "lambda-grid", global = true, value_name = "GRID")]
    pub lambda: Option<String>,
    /// Spectral angle grid η.
    #[arg(long, alias = "eta-grid", global = true, value_name = "GRID")]
    pub eta: Option<String>,
    /// Orbit length or truncation size grid.
    #[arg(long = "N", alias = "N-grid", global = true, value_name = "GRID")]
    pub n: Option<String>,
    /// Monte Carlo samples per cell.
    #[arg(long, global = true)]
    pub samples: Option<String>,
    /// Base points averaged per Lyapunov cell.
    #[arg(long, global = true)]
    pub base_points: Option<String>,
    /// Master seed; falls back to SZEGO_LAB_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<String>,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Output format, csv by default.
    #[arg(long, global = true, value_name = "csv|json")]
    pub format: Option<String>,
    /// Tolerance override NAME=VALUE; repeatable.
    #[arg(long, global = true, value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
    /// Config file (key = value lines, or JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base point "x,y" in radians or "rand:SEED".
    #[arg(long, global = true)]
    pub base: Option<String>,
    /// Distance kept from η ∈ {0, π}.
    #[arg(long, global = true)]
    pub delta: Option<String>,
    /// Spectral-window threshold c.
    #[arg(long, global = true)]
    pub window_c: Option<String>,
    /// Left boundary datum "re,im" on the unit circle.
    #[arg(long, global = true)]
    pub beta: Option<String>,
    /// Right boundary datum "re,im" on the unit circle.
    #[arg(long, global = true)]
    pub gamma: Option<String>,
    /// Deviation threshold; λ³ by default.
    #[arg(long, global = true)]
    pub threshold: Option<String>,
    /// Prüfer horizon T.
    #[arg(long, global = true)]
    pub horizon: Option<String>,
    /// Orbit length of Lyapunov estimates in `localize`.
    #[arg(long, global = true)]
    pub lyapunov_len: Option<String>,
    /// Deviation event for `ldt`: birkhoff, lyapunov or prufer.
    #[arg(long, global = true)]
    pub event: Option<String>,
    /// δ of the Birkhoff event.
    #[arg(long, global = true)]
    pub birkhoff_delta: Option<String>,
    /// Modulus of the spectral parameter z = r·e^{iη} in `green`.
    #[arg(long, global = true)]
    pub z_radius: Option<String>,
}

const KEYS: &[&str] = &[
    "A",
    "alpha",
    "preset",
    "lambda",
    "eta",
    "N",
    "samples",
    "base-points",
    "seed",
    "jobs",
    "out",
    "format",
    "tol",
    "base",
    "delta",
    "window-c",
    "beta",
    "gamma",
    "threshold",
    "horizon",
    "lyapunov-len",
    "event",
    "birkhoff-delta",
    "z-radius",
];

fn canonical_key(k: &str) -> Option<&'static str> {
    let k = k.trim().replace('_', "-");
    let k = match k.as_str() {
        "lambda-grid" => "lambda",
        "eta-grid" => "eta",
        "N-grid" | "n" | "n-grid" => "N",
        "a" => "A",
        other => other,
    }
    .to_string();
    KEYS.iter().copied().find(|&c| c == k)
}

#[derive(Clone, Debug, PartialEq)]
enum Source {
    Flag,
    File(PathBuf, usize),
    Env,
    Default,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Flag => write!(f, "command line"),
            Source::File(p, 0) => write!(f, "{}", p.display()),
            Source::File(p, line) => write!(f, "{} line {line}", p.display()),
            Source::Env => write!(f, "SZEGO_LAB_SEED"),
            Source::Default => write!(f, "default"),
        }
    }
}

/// A configuration problem, reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Settings = BTreeMap<&'static str, (String, Source)>;

/// Parses a config file body into (key, value, line) triples.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String, usize)>, String> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
        let obj = v.as_object().ok_or("JSON config must be an object")?;
        let scalar = |x: &serde_json::Value| match x {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            serde_json::Value::Bool(b) => Ok(b.to_string()),
            other => Err(format!("unsupported value {other}")),
        };
        let mut out = Vec::new();
        for (k, x) in obj {
            let value = match x {
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(scalar)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| format!("key '{k}': {e}"))?
                    .join(if k == "tol" { ";" } else { "," }),
                other => scalar(other).map_err(|e| format!("key '{k}': {e}"))?,
            };
            out.push((k.clone(), value, 0));
        }
        return Ok(out);
    }
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

fn flag_settings(o: &Opts) -> Vec<(&'static str, String)> {
    let pairs: [(&'static str, &Option<String>); 23] = [
        ("A", &o.a),
        ("alpha", &o.alpha),
        ("preset", &o.preset),
        ("lambda", &o.lambda),
        ("eta", &o.eta),
        ("N", &o.n),
        ("samples", &o.samples),
        ("base-points", &o.base_points),
        ("seed", &o.seed),
        ("jobs", &o.jobs),
        ("out", &o.out),
        ("format", &o.format),
        ("base", &o.base),
        ("delta", &o.delta),
        ("window-c", &o.window_c),
        ("beta", &o.beta),
        ("gamma", &o.gamma),
        ("threshold", &o.threshold),
        ("horizon", &o.horizon),
        ("lyapunov-len", &o.lyapunov_len),
        ("event", &o.event),
        ("birkhoff-delta", &o.birkhoff_delta),
        ("z-radius", &o.z_radius),
    ];
    pairs
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect()
}

fn defaults(cmd: Command) -> Vec<(&'static str, &'static str)> {
    let mut d = vec![
        ("A", "2,1,1,1"),
        ("preset", "alpha0"),
        ("lambda", "0.1"),
        ("eta", "1.5707963267948966"),
        ("N", "1000"),
        ("samples", "1000"),
        ("base-points", "8"),
        ("format", "csv"),
        ("delta", "0.1"),
        ("window-c", "0.25"),
        ("beta", "1,0"),
        ("gamma", "1,0"),
        ("lyapunov-len", "100000"),
        ("event", "lyapunov"),
        ("birkhoff-delta", "0.2"),
        ("z-radius", "1"),
    ];
    let mut set = |k: &'static str, v: &'static str| {
        for e in d.iter_mut() {
            if e.0 == k {
                e.1 = v;
            }
        }
    };
    match cmd {
        Command::Lyapunov => set("N", "100000"),
        Command::Jspec => set("eta", "0:6.283185307179586:65"),
        Command::Ldt => {
            set("N", "50,100,200,400");
            set("lambda", "0.3");
        }
        Command::Green => {
            set("N", "400");
            set("lambda", "0.5");
        }
        Command::Localize => {
            set("N", "400");
            set("lambda", "0.5");
        }
        Command::Selftest => {}
    }
    d
}

/// Named tolerances adjustable with `--tol NAME=VALUE`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Eigenpair residual ‖𝒞ξ − zξ‖.
    pub eigen: f64,
    /// Transfer-matrix/polynomial identity.
    pub identity: f64,
    /// Prüfer radius against |φ_N|, relative.
    pub prufer: f64,
    /// ‖𝒞*𝒞 − I‖_max.
    pub unitarity: f64,
    /// Green's modulus formula against the direct solve, relative.
    pub green: f64,
    /// Preset spectral functions against their closed forms.
    pub spectrum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eigen: 1e-8,
            identity: 1e-8,
            prufer: 1e-8,
            unitarity: 1e-12,
            green: 1e-6,
            spectrum: 1e-10,
        }
    }
}

impl Tolerances {
    fn set(&mut self, name: &str, value: f64) -> Result<(), String> {
        let slot = match name.trim() {
            "eigen" => &mut self.eigen,
            "identity" => &mut self.identity,
            "prufer" => &mut self.prufer,
            "unitarity" => &mut self.unitarity,
            "green" => &mut self.green,
            "spectrum" => &mut self.spectrum,
            other => return Err(format!("unknown tolerance '{other}'")),
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(format!("tolerance '{name}' must be positive"));
        }
        *slot = value;
        Ok(())
    }
}

/// A validated run: subcommand, experiment plan and output settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub plan: ExperimentPlan,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub tol: Tolerances,
    pub event: EventKind,
    pub birkhoff_delta: f64,
    pub z_radius: f64,
}

/// Parses "a,b,c" or "start:stop:count" (inclusive, evenly spaced).
pub fn parse_grid<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("range '{s}' must be start:stop:count"));
        }
        let a: f64 = parts[0].parse().map_err(|e| format!("'{}': {e}", parts[0]))?;
        let b: f64 = parts[1].parse().map_err(|e| format!("'{}': {e}", parts[1]))?;
        let n: usize = parts[2].parse().map_err(|e| format!("'{}': {e}", parts[2]))?;
        if n == 0 {
            return Err("range count must be positive".into());
        }
        return (0..n)
            .map(|i| {
                let x = if n == 1 {
                    a
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                };
                x.to_string()
                    .parse::<T>()
                    .or_else(|_| x.round().to_string().parse::<T>())
                    .map_err(|e| format!("grid value {x}: {e}"))
            })
            .collect();
    }
    let v: Vec<T> = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|e| format!("'{}': {e}", t.trim())))
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty grid".into());
    }
    Ok(v)
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| format!("'{s}' must be re,im"))?;
    let re: f64 = re.trim().parse().map_err(|e| format!("'{re}': {e}"))?;
    let im: f64 = im.trim().parse().map_err(|e| format!("'{im}': {e}"))?;
    Ok(Complex64::new(re, im))
}

impl RunConfig {
    /// Merges flags, config file, the seed environment variable and defaults.
    pub fn resolve(
        command: Command,
        opts: &Opts,
        env_seed: Option<String>,
    ) -> Result<Self, ConfigError> {
        let cerr = |m: String| ConfigError(m);
        let mut settings: Settings = BTreeMap::new();
        for (k, v) in defaults(command) {
            settings.insert(k, (v.to_string(), Source::Default));
        }
        if let Some(s) = env_seed {
            settings.insert("seed", (s, Source::Env));
        }
        let mut tol_entries: Vec<(String, Source)> = Vec::new();
        if let Some(path) = &opts.config {
            let text = fs::read_to_string(path)
                .map_err(|e| cerr(format!("cannot read config {}: {e}", path.display())))?;
            let entries =
                parse_config_text(&text).map_err(|e| cerr(format!("{}: {e}", path.display())))?;
            for (k, v, line) in entries {
                let src = Source::File(path.clone(), line);
                let key = canonical_key(&k)
                    .ok_or_else(|| cerr(format!("{src}: unknown key '{k}'")))?;
                if key == "tol" {
                    for t in v.split([';', ',']).filter(|t| !t.trim().is_empty()) {
                        tol_entries.push((t.trim().to_string(), src.clone()));
                    }
                } else {
                    settings.insert(key, (v, src));
                }
            }
        }
        for (k, v) in flag_settings(opts) {
            settings.insert(k, (v, Source::Flag));
        }
        for t in &opts.tol {
            tol_entries.push((t.clone(), Source::Flag));
        }

        let get = |k: &str| settings.get(k).map(|(v, s)| (v.as_str(), s));
        let field = |k: &str, src: &Source, m: String| cerr(format!("invalid '{k}' ({src}): {m}"));
        fn parsed<T: std::str::FromStr>(
            settings: &Settings,
            k: &str,
        ) -> Result<Option<T>, ConfigError>
        where
            T::Err: fmt::Display,
        {
            match settings.get(k) {
                None => Ok(None),
                Some((v, src)) => v
                    .trim()
                    .parse::<T>()
                    .map(Some)
                    .map_err(|e| ConfigError(format!("invalid '{k}' ({src}): {e}"))),
            }
        }
        let grid = |k: &str| -> Result<Option<Vec<f64>>, ConfigError> {
            get(k)
                .map(|(v, src)| parse_grid::<f64>(v).map_err(|m| field(k, src, m)))
                .transpose()
        };

        let (a_str, a_src) = get("A").expect("default present");
        let automorphism = ToralAutomorphism::parse(a_str)
            .map_err(|e| field("A", a_src, e.to_string()))?;
        let alpha = match (get("alpha"), get("preset")) {
            (Some((v, src)), _) => {
                TrigPolynomial::parse(v).map_err(|e| field("alpha", src, e.to_string()))?
            }
            (None, Some((v, src))) => TrigPolynomial::preset(v.trim())
                .ok_or_else(|| field("preset", src, format!("unknown preset '{v}'")))?,
            (None, None) => TrigPolynomial::alpha0(),
        };
        let lambdas = grid("lambda")?.expect("default present");
        let etas = grid("eta")?.expect("default present");
        let ns = match get("N") {
            Some((v, src)) => parse_grid::<f64>(v)
                .map_err(|m| field("N", src, m))?
                .into_iter()
                .map(|x| {
                    if x >= 1.0 && x.fract() == 0.0 && x < 1e15 {
                        Ok(x as usize)
                    } else {
                        Err(field("N", src, format!("{x} is not a positive integer")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => unreachable!("default present"),
        };
        let samples: usize = parsed(&settings, "samples")?.expect("default");
        let base_points: usize = parsed(&settings, "base-points")?.expect("default");
        let master_seed: u64 = parsed(&settings, "seed")?.unwrap_or(0);
        let jobs: Option<usize> = parsed(&settings, "jobs")?;
        let delta: f64 = parsed(&settings, "delta")?.expect("default");
        let window_c: f64 = parsed(&settings, "window-c")?.expect("default");
        let threshold: Option<f64> = parsed(&settings, "threshold")?;
        let horizon: Option<usize> = parsed(&settings, "horizon")?;
        let lyapunov_len: usize = parsed(&settings, "lyapunov-len")?.expect("default");
        let birkhoff_delta: f64 = parsed(&settings, "birkhoff-delta")?.expect("default");
        let z_radius: f64 = parsed(&settings, "z-radius")?.expect("default");
        let boundary = |k: &str| -> Result<Complex64, ConfigError> {
            let (v, src) = get(k).expect("default present");
            let c = parse_complex(v).map_err(|m| field(k, src, m))?;
            if (c.norm() - 1.0).abs() > 1e-12 {
                return Err(field(k, src, format!("|{k}| = {} is not 1", c.norm())));
            }
            Ok(c)
        };
        let beta = boundary("beta")?;
        let gamma = boundary("gamma")?;
        let base = get("base")
            .map(|(v, src)| parse_base(v).map_err(|e| field("base", src, e.to_string())))
            .transpose()?;
        let (fmt_str, fmt_src) = get("format").expect("default present");
        let format = Format::from_str(fmt_str.trim(), true)
            .map_err(|_| field("format", fmt_src, format!("'{fmt_str}' is not csv or json")))?;
        let (ev_str, ev_src) = get("event").expect("default present");
        let event = EventKind::from_str(ev_str.trim(), true).map_err(|_| {
            field("event", ev_src, format!("'{ev_str}' is not birkhoff, lyapunov or prufer"))
        })?;
        let out = get("out").map(|(v, _)| PathBuf::from(v));
        let mut tol = Tolerances::default();
        for (t, src) in &tol_entries {
            let (name, value) = t
                .split_once('=')
                .ok_or_else(|| field("tol", src, format!("'{t}' must be NAME=VALUE")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| field("tol", src, format!("'{value}': {e}")))?;
            tol.set(name, value).map_err(|m| field("tol", src, m))?;
        }
        if !(z_radius > 0.0 && z_radius.is_finite()) {
            return Err(cerr("invalid 'z-radius': must be positive".into()));
        }
        if !(birkhoff_delta > 0.0) {
            return Err(cerr("invalid 'birkhoff-delta': must be positive".into()));
        }

        let plan = ExperimentPlan {
            automorphism,
            alpha,
            lambdas,
            etas,
            ns,
            samples,
            base_points,
            master_seed,
            jobs,
            delta,
            window_c,
            beta,
            gamma,
            threshold,
            horizon,
            lyapunov_len,
            base,
        };
        // jspec sweeps the full circle, so the {0, π} exclusion does not apply
        if command != Command::Jspec && command != Command::Selftest {
            plan.validate().map_err(|e| cerr(e.to_string()))?;
        }
        Ok(Self {
            command,
            plan,
            out,
            format,
            tol,
            event,
            birkhoff_delta,
            z_radius,
        })
    }
}

/// One row of a `jspec` sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct JspecRow {
    pub eta: f64,
    pub j: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct JspecResult {
    pub truncation: usize,
    pub rows: Vec<JspecRow>,
}

pub fn jspec(plan: &ExperimentPlan) -> crate::Result<JspecResult> {
    let spectrum = CorrelationSpectrum::new(&plan.alpha, &plan.automorphism)?;
    let rows = plan
        .etas
        .iter()
        .map(|&eta| Ok(JspecRow { eta, j: spectrum.evaluate(eta)? }))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(JspecResult {
        truncation: spectrum.truncation(),
        rows,
    })
}

/// Marker written by `localize` when the window holds no eigenvalues.
pub const EMPTY_WINDOW_MARKER: &str = "# no eigenvalues in I₀";

fn csv_rows<T: Serialize>(rows: &[T], header: Option<&str>) -> io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(io::Error::other)?;
    }
    if rows.is_empty() && header.is_none() {
        return Ok(Vec::new());
    }
    let body = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    match header {
        Some(h) => {
            let mut out = format!("{h}\n").into_bytes();
            out.extend(body);
            Ok(out)
        }
        None => Ok(body),
    }
}

fn json_bytes<T: Serialize>(v: &T) -> io::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v).map_err(io::Error::other)?;
    out.push(b'\n');
    Ok(out)
}

const LYAPUNOV_HEADER: &str = "lambda,eta,n,l_n,l_norm,prediction,residual,l_n_se";
const LDT_HEADER: &str = "family,n,samples,count,fraction,upper_bound,threshold,p95";
const LOCALIZATION_HEADER: &str =
    "eta,peak,decay_rate,r2,localization_length,lyapunov,ratio,residual";

/// Renders the output of a non-selftest run.
pub fn render(cfg: &RunConfig) -> crate::Result<Vec<u8>> {
    let plan = &cfg.plan;
    let io_err = |e: io::Error| Error::Config(format!("output: {e}"));
    let csv = cfg.format == Format::Csv;
    let bytes = match cfg.command {
        Command::Lyapunov => {
            let r = lyapunov_scaling(plan)?;
            if csv {
                csv_rows(&r.rows, Some(LYAPUNOV_HEADER))
            } else {
                json_bytes(&r)
            }
        }
        Command::Jspec => {
            let r = jspec(plan)?;
            if csv {
                csv_rows(&r.rows, Some("eta,j"))
            } else {
                json_bytes(&r)
            }
        }
        Command::Ldt => {
            let results: Vec<LdtResult> = match cfg.event {
                EventKind::Birkhoff => vec![ldt_deviation(
                    plan,
                    DeviationEvent::Birkhoff {
                        delta: cfg.birkhoff_delta,
                    },
                )?],
                EventKind::Lyapunov => vec![ldt_deviation(plan, DeviationEvent::Lyapunov)?],
                EventKind::Prufer => prufer_term_ldt(plan)?,
            };
            if csv {
                let rows: Vec<_> = results.iter().flat_map(|r| r.rows.clone()).collect();
                csv_rows(&rows, Some(LDT_HEADER))
            } else {
                json_bytes(&results)
            }
        }
        Command::Green => {
            let cfgv = VerblunskyConfig::new(
                plan.lambdas[0],
                plan.single_base(),
                plan.automorphism.clone(),
                plan.alpha.clone(),
            )?;
            let z = Complex64::from_polar(cfg.z_radius, plan.etas[0]);
            let p: DecayProfile = decay_profile(&cfgv, z, plan.ns[0], plan.beta, plan.gamma)?;
            if csv {
                csv_rows(&p.rows, Some(DecayProfile::CSV_HEADER))
            } else {
                json_bytes(&p)
            }
        }
        Command::Localize => {
            let r = localization(plan)?;
            if csv {
                let mut out = csv_rows(&r.rows, Some(LOCALIZATION_HEADER));
                if r.is_empty() {
                    if let Ok(o) = out.as_mut() {
                        o.extend(format!("{EMPTY_WINDOW_MARKER}\n").into_bytes());
                    }
                }
                out
            } else {
                json_bytes(&r)
            }
        }
        Command::Selftest => unreachable!("selftest has no rendered output"),
    };
    bytes.map_err(io_err)
}

/// One selftest check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check {
        name,
        value,
        tolerance,
        pass: value <= tolerance,
    }
}

/// Fast invariant suite over a handful of seed-derived configurations.
pub fn selftest(cfg: &RunConfig) -> crate::Result<Vec<Check>> {
    let plan = &cfg.plan;
    let tol = &cfg.tol;
    let a = &plan.automorphism;
    let alpha = &plan.alpha;
    let lam_max = 0.9 / alpha.sup_bound();
    let config = |i: u64| -> crate::Result<VerblunskyConfig> {
        let lam = lam_max * ((i % 7) as f64 + 1.0) / 8.0;
        VerblunskyConfig::new(lam, base_point(plan.master_seed, 1000, i), a.clone(), alpha.clone())
    };
    let eta_of = |i: u64| 0.3 + 0.77 * i as f64;

    let mut identity: f64 = 0.0;
    for i in 0..8 {
        let c = config(i)?;
        for n in [1, 10, 100, 1000] {
            identity = identity.max(transfer_identity_residual(&c, &SpectralPoint::new(eta_of(i)), n));
        }
    }
    let mut pruf: f64 = 0.0;
    for i in 0..4 {
        let c = config(i)?;
        let s = SpectralPoint::new(eta_of(i));
        let run = prufer::run(&c, &s, 10_000, 10_000);
        let log_phi = polynomials(&c, &s, 10_000).log_abs_phi();
        pruf = pruf.max(((run.last.log_r - log_phi).exp() - 1.0).abs());
    }
    let mut unit: f64 = 0.0;
    let mut green: f64 = 0.0;
    for i in 0..6u64 {
        let c = config(i)?;
        let (lo, hi) = (i as usize % 3, 40 + 7 * i as usize);
        let beta = Complex64::from_polar(1.0, 0.4 * i as f64);
        let gamma = Complex64::from_polar(1.0, -1.1 * i as f64);
        let cmv = FiniteCMV::build(&c, lo, hi, beta, gamma)?;
        unit = unit.max(cmv.unitarity_residual());
        let z = Complex64::from_polar(1.0, eta_of(i));
        for (n1, n2) in [(lo, hi - 1), (hi - 3, lo + 2), (lo + 5, lo + 5), (hi - 10, hi - 20)] {
            let d = green_direct(&cmv, z, n1, n2)?.norm();
            let f = green_modulus_formula(&cmv, z, n1, n2)?;
            green = green.max((d - f).abs() / d.max(f64::MIN_POSITIVE));
        }
    }
    let mut spec: f64 = 0.0;
    let cat = ToralAutomorphism::cat_map();
    let j0 = CorrelationSpectrum::new(&TrigPolynomial::alpha0(), &cat)?;
    let j1 = CorrelationSpectrum::new(&TrigPolynomial::alpha1(), &cat)?;
    for k in 0..32 {
        let eta = TAU * k as f64 / 32.0;
        spec = spec.max((j0.evaluate(eta)? - 0.5).abs());
        spec = spec.max((j1.evaluate(eta)? - (eta / 2.0).cos().powi(2)).abs());
    }
    let small = ExperimentPlan {
        lambdas: vec![0.3],
        etas: vec![PI / 2.0],
        ns: vec![20, 40],
        samples: 64,
        ..plan.clone()
    };
    let runs: Vec<_> = [Some(1), Some(3)]
        .into_iter()
        .map(|jobs| ldt_deviation(&ExperimentPlan { jobs, ..small.clone() }, DeviationEvent::Lyapunov))
        .collect::<crate::Result<_>>()?;
    let determinism = if runs[0] == runs[1] { 0.0 } else { 1.0 };

    Ok(vec![
        check("transfer_identity", identity, tol.identity),
        check("prufer_radius", pruf, tol.prufer),
        check("unitarity", unit, tol.unitarity),
        check("green_formula", green, tol.green),
        check("preset_spectra", spec, tol.spectrum),
        check("determinism", determinism, 0.5),
    ])
}

/// Runs a resolved configuration and returns the exit code.
pub fn dispatch(cfg: &RunConfig) -> i32 {
    let report = |e: &Error| {
        eprintln!("szego-lab: {e}");
        if e.is_config() {
            EXIT_CONFIG
        } else {
            EXIT_FAILURE
        }
    };
    if cfg.command == Command::Selftest {
        return match selftest(cfg) {
            Ok(checks) => {
                let mut stdout = io::stdout().lock();
                for c in &checks {
                    let tag = if c.pass { "PASS" } else { "FAIL" };
                    let _ = writeln!(stdout, "{tag} {} value={:e} tol={:e}", c.name, c.value, c.tolerance);
                }
                if checks.iter().all(|c| c.pass) {
                    EXIT_OK
                } else {
                    EXIT_FAILURE
                }
            }
            Err(e) => report(&e),
        };
    }
    let bytes = match render(cfg) {
        Ok(b) => b,
        Err(e) => return report(&e),
    };
    if cfg.command == Command::Localize && bytes.ends_with(format!("{EMPTY_WINDOW_MARKER}\n").as_bytes()) {
        eprintln!("szego-lab: no eigenvalues in I₀");
    }
    let written = match &cfg.out {
        Some(p) => fs::write(p, &bytes),
        None => io::stdout().lock().write_all(&bytes),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("szego-lab: cannot write output: {e}");
            EXIT_FAILURE
        }
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let env_seed = std::env::var("SZEGO_LAB_SEED").ok();
    match RunConfig::resolve(cli.command, &cli.opts, env_seed) {
        Ok(cfg) => dispatch(&cfg),
        Err(e) => {
            eprintln!("szego-lab: {e}");
            EXIT_CONFIG
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(args: &[&str]) -> Result<RunConfig, ConfigError> {
        let cli = Cli::try_parse_from(std::iter::once("szego-lab").chain(args.iter().copied()))
            .map_err(|e| ConfigError(e.to_string()))?;
        RunConfig::resolve(cli.command, &cli.opts, None)
    }

    #[test]
    fn parses_lyapunov_flags() {
        let c = resolve(&["--lambda", "0.1", "--eta", "1.5708", "--N", "1000000", "lyapunov"]).unwrap();
        assert_eq!(c.command, Command::Lyapunov);
        assert_eq!(c.plan.lambdas, vec![0.1]);
        assert_eq!(c.plan.ns, vec![1_000_000]);
        let c = resolve(&["lyapunov", "--lambda-grid", "0.05,0.1,0.2", "--N", "1e3"]).unwrap();
        assert_eq!(c.plan.lambdas.len(), 3);
        assert_eq!(c.plan.ns, vec![1000]);
    }

    #[test]
    fn rejects_parabolic_matrix_and_unknown_tolerance() {
        let e = resolve(&["--A", "1,1,0,1", "lyapunov"]).unwrap_err();
        assert!(e.0.contains("'A'"), "{e}");
        assert!(resolve(&["--tol", "bogus=1", "lyapunov"]).is_err());
        assert!(resolve(&["--tol", "eigen=1e-9", "lyapunov"]).is_ok());
        assert!(resolve(&["--beta", "1,1", "localize"]).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid::<f64>("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid::<usize>("50, 100,200").unwrap(), vec![50, 100, 200]);
        assert!(parse_grid::<f64>("1:2").is_err());
        assert!(parse_grid::<f64>("").is_err());
    }

    #[test]
    fn config_text_forms() {
        let kv = parse_config_text("# c\nlambda = 0.2\n\nN=10,20\n").unwrap();
        assert_eq!(kv[0], ("lambda".into(), "0.2".into(), 2));
        assert_eq!(kv[1].2, 4);
        let js = parse_config_text(r#"{"lambda": 0.2, "N": [10, 20], "preset": "alpha1"}"#).unwrap();
        assert!(js.contains(&("N".into(), "10,20".into(), 0)));
        assert!(parse_config_text("lambda 0.2").is_err());
    }

    #[test]
    fn precedence_and_unknown_keys() {
        let dir = std::env::temp_dir().join(format!("szego-cli-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let good = dir.join("good.conf");
        fs::write(&good, "lambda = 0.2\nseed = 5\nsamples = 33\n").unwrap();
        let path = good.to_str().unwrap();
        let c = resolve(&["--config", path, "--lambda", "0.05", "ldt"]).unwrap();
        assert_eq!(c.plan.lambdas, vec![0.05]);
        assert_eq!(c.plan.master_seed, 5);
        assert_eq!(c.plan.samples, 33);
        let cli = Cli::try_parse_from(["szego-lab", "ldt"]).unwrap();
        let c = RunConfig::resolve(cli.command, &cli.opts, Some("17".into())).unwrap();
        assert_eq!(c.plan.master_seed, 17);
        let bad = dir.join("bad.conf");
        fs::write(&bad, "lambda = 0.2\nfrobnicate = 1\n").unwrap();
        let e = resolve(&["--config", bad.to_str().unwrap(), "ldt"]).unwrap_err();
        assert!(e.0.contains("line 2") && e.0.contains("frobnicate"), "{e}");
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn jspec_alpha1_matches_closed_form() {
        let c = resolve(&["--preset", "alpha1", "--eta", "0:3.14159:9", "jspec"]).unwrap();
        for row in jspec(&c.plan).unwrap().rows {
            assert!((row.j - (row.eta / 2.0).cos().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn selftest_passes() {
        let c = resolve(&["selftest"]).unwrap();
        let checks = selftest(&c).unwrap();
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }
}
