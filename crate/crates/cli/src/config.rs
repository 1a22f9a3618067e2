//! Run configuration and the `name:key=value,...` descriptors used on the
//! command line and in config files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use noisestab::boolean::Codomain;
use noisestab::bounds::{default_noise_grid, default_time_grid, log_grid, BoundId, BoundSpec, Clock};
use noisestab::junta::Rounding;
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliError};

/// A `name:key=value,...` descriptor split into its parts.
struct Descriptor<'a> {
    name: &'a str,
    keyed: Vec<(&'a str, &'a str)>,
    positional: Vec<&'a str>,
}

impl<'a> Descriptor<'a> {
    fn parse(text: &'a str) -> Self {
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut keyed = Vec::new();
        let mut positional = Vec::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once('=') {
                Some((k, v)) => keyed.push((k.trim(), v.trim())),
                None => positional.push(part),
            }
        }
        Self { name: name.trim(), keyed, positional }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.keyed.iter().find(|(k, _)| *k == key) {
            None => Ok(None),
            Some((_, v)) => v.parse().map(Some).map_err(|_| usage(format!("`{}`: bad value `{v}` for {key}", self.name))),
        }
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.get(key)?.ok_or_else(|| usage(format!("`{}` needs {key}=...", self.name)))
    }

    /// Rejects keys outside `allowed` and, unless `positional` is set, bare values.
    fn check(&self, allowed: &[&str], positional: bool) -> Result<(), CliError> {
        if let Some((k, _)) = self.keyed.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(usage(format!("`{}` does not take {k}", self.name)));
        }
        if !positional && !self.positional.is_empty() {
            return Err(usage(format!("`{}`: unexpected value `{}`", self.name, self.positional[0])));
        }
        Ok(())
    }
}

/// The model a run works on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSpec {
    Cube { n: usize, p: f64 },
    Torus { m: usize, n: usize },
    Symmetric { n: usize },
    Gaussian { n: usize, degree: usize },
}

impl FromStr for ModelSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let d = Descriptor::parse(s);
        let model = match d.name {
            "cube" => {
                d.check(&["n", "p"], false)?;
                ModelSpec::Cube { n: d.require("n")?, p: d.get("p")?.unwrap_or(0.5) }
            }
            "torus" => {
                d.check(&["m", "n"], false)?;
                ModelSpec::Torus { m: d.require("m")?, n: d.require("n")? }
            }
            "symmetric" => {
                d.check(&["n"], false)?;
                ModelSpec::Symmetric { n: d.require("n")? }
            }
            "gaussian" => {
                d.check(&["n", "degree"], false)?;
                ModelSpec::Gaussian { n: d.require("n")?, degree: d.get("degree")?.unwrap_or(6) }
            }
            other => return Err(usage(format!("unknown model `{other}` (cube, torus, symmetric, gaussian)"))),
        };
        Ok(model)
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = CliError;

    fn try_from(s: String) -> Result<Self, CliError> {
        s.parse()
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.to_string()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Cube { n, p } => write!(f, "cube:n={n},p={p}"),
            ModelSpec::Torus { m, n } => write!(f, "torus:m={m},n={n}"),
            ModelSpec::Symmetric { n } => write!(f, "symmetric:n={n}"),
            ModelSpec::Gaussian { n, degree } => write!(f, "gaussian:n={n},degree={degree}"),
        }
    }
}

/// One entry of a function family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FunctionSpec {
    Dictator { i: usize, codomain: Codomain },
    Parity { codomain: Codomain },
    Majority { codomain: Codomain },
    Tribes { width: usize, codomain: Codomain },
    Constant { c: f64 },
    /// `<bitstring> <value>` table.
    File { path: PathBuf },
    /// Seeded random functions: 0/1 tables on finite models, decaying
    /// Hermite coefficients in Gauss space.
    Random { count: usize },
    /// `1{x_k = value}` on a torus.
    Coordinate { k: usize, value: usize },
    /// `1{σ(i) = i}` on a symmetric group.
    Fixes { i: usize },
    /// `1{x₁ ≤ a}`.
    Halfspace { a: f64 },
    /// `1{x_i ≤ a_i for all i}`.
    Box { thresholds: Vec<f64> },
    /// Hermite coefficients from a JSON file.
    Hermite { path: PathBuf },
}

fn parse_codomain(d: &Descriptor) -> Result<Codomain, CliError> {
    match d.keyed.iter().find(|(k, _)| *k == "values").map(|(_, v)| *v) {
        None | Some("pm1") => Ok(Codomain::PlusMinusOne),
        Some("01") => Ok(Codomain::ZeroOne),
        Some(other) => Err(usage(format!("values must be pm1 or 01, not `{other}`"))),
    }
}

fn codomain_suffix(c: Codomain) -> &'static str {
    match c {
        Codomain::PlusMinusOne => "",
        Codomain::ZeroOne => ",values=01",
    }
}

impl FromStr for FunctionSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let d = Descriptor::parse(s);
        let spec = match d.name {
            "dictator" => {
                d.check(&["i", "values"], false)?;
                FunctionSpec::Dictator { i: d.get("i")?.unwrap_or(0), codomain: parse_codomain(&d)? }
            }
            "parity" => {
                d.check(&["values"], false)?;
                FunctionSpec::Parity { codomain: parse_codomain(&d)? }
            }
            "majority" => {
                d.check(&["values"], false)?;
                FunctionSpec::Majority { codomain: parse_codomain(&d)? }
            }
            "tribes" => {
                d.check(&["width", "values"], false)?;
                FunctionSpec::Tribes { width: d.require("width")?, codomain: parse_codomain(&d)? }
            }
            "constant" => {
                d.check(&["c"], false)?;
                FunctionSpec::Constant { c: d.get("c")?.unwrap_or(1.0) }
            }
            "file" => {
                d.check(&["path"], true)?;
                FunctionSpec::File { path: path_of(&d)? }
            }
            "random" => {
                d.check(&["count"], false)?;
                FunctionSpec::Random { count: d.get("count")?.unwrap_or(1) }
            }
            "coordinate" => {
                d.check(&["k", "value"], false)?;
                FunctionSpec::Coordinate { k: d.get("k")?.unwrap_or(0), value: d.get("value")?.unwrap_or(0) }
            }
            "fixes" => {
                d.check(&["i"], false)?;
                FunctionSpec::Fixes { i: d.get("i")?.unwrap_or(0) }
            }
            "halfspace" => {
                d.check(&["a"], false)?;
                FunctionSpec::Halfspace { a: d.get("a")?.unwrap_or(0.0) }
            }
            "box" => {
                d.check(&[], true)?;
                let thresholds = d
                    .positional
                    .iter()
                    .map(|v| v.parse::<f64>().map_err(|_| usage(format!("box: bad threshold `{v}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if thresholds.is_empty() {
                    return Err(usage("box needs thresholds, as in box:0.5,-1"));
                }
                FunctionSpec::Box { thresholds }
            }
            "hermite" => {
                d.check(&["path"], true)?;
                FunctionSpec::Hermite { path: path_of(&d)? }
            }
            other => return Err(usage(format!("unknown function `{other}`"))),
        };
        Ok(spec)
    }
}

fn path_of(d: &Descriptor) -> Result<PathBuf, CliError> {
    let path = d.keyed.iter().find(|(k, _)| *k == "path").map(|(_, v)| *v).or(d.positional.first().copied());
    path.map(PathBuf::from).ok_or_else(|| usage(format!("`{}` needs a path", d.name)))
}

impl TryFrom<String> for FunctionSpec {
    type Error = CliError;

    fn try_from(s: String) -> Result<Self, CliError> {
        s.parse()
    }
}

impl From<FunctionSpec> for String {
    fn from(f: FunctionSpec) -> String {
        f.to_string()
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Dictator { i, codomain } => write!(f, "dictator:i={i}{}", codomain_suffix(*codomain)),
            FunctionSpec::Parity { codomain } => write!(f, "parity{}", codomain_suffix(*codomain).replacen(',', ":", 1)),
            FunctionSpec::Majority { codomain } => {
                write!(f, "majority{}", codomain_suffix(*codomain).replacen(',', ":", 1))
            }
            FunctionSpec::Tribes { width, codomain } => write!(f, "tribes:width={width}{}", codomain_suffix(*codomain)),
            FunctionSpec::Constant { c } => write!(f, "constant:c={c}"),
            FunctionSpec::File { path } => write!(f, "file:{}", path.display()),
            FunctionSpec::Random { count } => write!(f, "random:count={count}"),
            FunctionSpec::Coordinate { k, value } => write!(f, "coordinate:k={k},value={value}"),
            FunctionSpec::Fixes { i } => write!(f, "fixes:i={i}"),
            FunctionSpec::Halfspace { a } => write!(f, "halfspace:a={a}"),
            FunctionSpec::Box { thresholds } => {
                let parts: Vec<String> = thresholds.iter().map(f64::to_string).collect();
                write!(f, "box:{}", parts.join(","))
            }
            FunctionSpec::Hermite { path } => write!(f, "hermite:{}", path.display()),
        }
    }
}

/// A grid of times or noise rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    /// `default`, `log:lo:hi:points` or a comma-separated list.
    Text(String),
}

impl GridSpec {
    pub fn resolve(&self, clock: Clock) -> Result<Vec<f64>, CliError> {
        let values = match self {
            GridSpec::Values(v) => v.clone(),
            GridSpec::Text(text) => {
                let text = text.trim();
                if text == "default" {
                    default_grid(clock)
                } else if let Some(rest) = text.strip_prefix("log:") {
                    let parts: Vec<&str> = rest.split(':').collect();
                    let [lo, hi, points] = parts[..] else {
                        return Err(usage("log grids read log:lo:hi:points"));
                    };
                    let bad = || usage(format!("bad log grid `{text}`"));
                    let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
                    let points: usize = points.parse().map_err(|_| bad())?;
                    if !(lo > 0.0 && hi >= lo) || points == 0 {
                        return Err(usage("log grids need 0 < lo ≤ hi and at least one point"));
                    }
                    log_grid(lo, hi, points)
                } else {
                    text.split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|_| usage(format!("bad grid value `{v}`"))))
                        .collect::<Result<_, _>>()?
                }
            }
        };
        if values.is_empty() {
            return Err(usage("the grid is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(usage("grid values must be finite"));
        }
        Ok(values)
    }
}

pub fn default_grid(clock: Clock) -> Vec<f64> {
    match clock {
        Clock::Time => default_time_grid(),
        Clock::Noise => default_noise_grid(),
    }
}

/// Bound parameters; unset fields fall back to the bound's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub bound: BoundId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default)]
    pub clock: Clock,
}

impl BoundConfig {
    pub fn new(bound: BoundId) -> Self {
        Self { bound, rho: None, lambda: None, c: None, constant: None, exponent: None, clock: Clock::Time }
    }

    pub fn to_spec(&self, r: f64) -> BoundSpec {
        let mut spec = BoundSpec::new(self.bound).with_r(r).with_clock(self.clock);
        if let Some(rho) = self.rho {
            spec = spec.with_rho(rho);
        }
        if let Some(lambda) = self.lambda {
            spec = spec.with_lambda(lambda);
        }
        if let Some(c) = self.c {
            spec = spec.with_c(c);
        }
        if let Some(constant) = self.constant {
            spec = spec.with_constant(constant);
        }
        if let Some(exponent) = self.exponent {
            spec = spec.with_exponent(exponent);
        }
        spec
    }
}

/// Everything a command needs; loaded from `--config` and then overridden
/// by flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    pub functions: Vec<FunctionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Norm exponent of influences and of the bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Monte Carlo samples for the stability column; none skips it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Target `L¹` error; switches the junta command to a grid search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounding: Option<Rounding>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        self.model.ok_or_else(|| usage("no model given (use --model)"))
    }

    pub fn r(&self) -> f64 {
        self.r.unwrap_or(1.0)
    }
}
