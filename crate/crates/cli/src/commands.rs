//! The five commands. Each produces a JSON result, an optional CSV table and
//! a pass flag.

use std::io::Write;
use std::sync::Arc;

use noisestab::boolean::{build_cube_generator, noise_stability, noise_stability_mc, time_for_noise, two_point_log_sobolev, InfluenceProfile};
use noisestab::bounds::{verify, CayleySetting, Clock, Member, Subject};
use noisestab::gauss::{
    default_quad_order, gaussian_noise_stability_box, gaussian_noise_stability_mc, geometric_influence_halfspace,
};
use noisestab::groups::GroupKind;
use noisestab::junta::{friedgut_check, junta_extract, JuntaTarget};
use noisestab::markov::{log_sobolev_search, SemigroupEvolution};
use noisestab::mc::McEstimate;
use serde::Serialize;

use crate::config::{default_grid, ModelSpec, RunConfig};
use crate::error::{usage, CliError};
use crate::family::{build_family, build_model, Family, GaussFunction};

/// Search restarts and tolerance of the variational log-Sobolev estimate.
const LOG_SOBOLEV_RESTARTS: usize = 12;
const LOG_SOBOLEV_TOL: f64 = 1e-10;
/// Agreement required of computed constants with their closed forms.
const GAP_TOL: f64 = 1e-9;
const LOG_SOBOLEV_REL_TOL: f64 = 0.01;
/// Convergence tolerance of Gaussian derivative norms.
const NORM_TOL: f64 = 1e-8;

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Output {
    pub command: &'static str,
    pub result: serde_json::Value,
    pub csv: Option<String>,
    pub passed: bool,
}

#[derive(Serialize)]
struct Envelope<'a> {
    command: &'a str,
    config: &'a RunConfig,
    result: &'a serde_json::Value,
    passed: bool,
}

impl Output {
    /// Pretty JSON of `{command, config, result, passed}`; output paths are
    /// left out of the echoed config so that reruns compare equal.
    pub fn to_json(&self, config: &RunConfig) -> String {
        let mut echoed = config.clone();
        echoed.out = None;
        echoed.csv = None;
        let envelope = Envelope { command: self.command, config: &echoed, result: &self.result, passed: self.passed };
        let mut text = serde_json::to_string_pretty(&envelope).expect("reports serialize");
        text.push('\n');
        text
    }

    /// Writes the JSON to `config.out` (stdout when unset) and the CSV to
    /// `config.csv` when set.
    pub fn write(&self, config: &RunConfig) -> Result<(), CliError> {
        let json = self.to_json(config);
        match &config.out {
            Some(path) => std::fs::write(path, json).map_err(|e| CliError::io(path, e))?,
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(json.as_bytes()).map_err(|e| CliError::io("<stdout>".as_ref(), e))?;
            }
        }
        if let Some(path) = &config.csv {
            let table = self.csv.as_deref().unwrap_or_default();
            std::fs::write(path, table).map_err(|e| CliError::io(path, e))?;
        }
        Ok(())
    }
}

pub fn execute(command: &'static str, config: &RunConfig) -> Result<Output, CliError> {
    let (result, csv, passed) = match command {
        "influences" => influences(config)?,
        "stability" => stability(config)?,
        "verify" => run_verify(config)?,
        "constants" => constants(config)?,
        "junta" => junta(config)?,
        other => return Err(usage(format!("unknown command `{other}`"))),
    };
    Ok(Output { command, result, csv, passed })
}

type Produced = (serde_json::Value, Option<String>, bool);

fn to_value(v: impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("rows serialize");
    }
    String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn family(config: &RunConfig) -> Result<Family, CliError> {
    build_family(config.model()?, &config.functions, config.seed)
}

#[derive(Serialize)]
struct InfluenceEntry {
    function_id: String,
    /// Generator names on Cayley models.
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    kind: &'static str,
    values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    set_influences: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct InfluenceRow<'a> {
    function_id: &'a str,
    coordinate: String,
    kind: &'static str,
    value: f64,
    set_influence: Option<f64>,
}

fn influences(config: &RunConfig) -> Result<Produced, CliError> {
    let r = config.r();
    let entries: Vec<InfluenceEntry> = match family(config)? {
        Family::Cube { functions, .. } => functions
            .iter()
            .map(|(id, f)| {
                let profile = InfluenceProfile::of(f, r)?;
                Ok(InfluenceEntry {
                    function_id: id.clone(),
                    labels: None,
                    kind: "derivative_norm",
                    values: profile.values,
                    set_influences: profile.set_influences,
                })
            })
            .collect::<Result<_, CliError>>()?,
        Family::Cayley { model, functions } => functions
            .iter()
            .map(|(id, f)| {
                let count = model.generator_count();
                let values = (0..count).map(|s| model.derivative_norm(f, s, r)).collect::<Result<_, _>>()?;
                let indicator = f.values().iter().all(|&v| v == 0.0 || v == 1.0);
                let set_influences = if indicator {
                    Some((0..count).map(|s| model.cayley_influence(f, s)).collect::<Result<_, _>>()?)
                } else {
                    None
                };
                Ok(InfluenceEntry {
                    function_id: id.clone(),
                    labels: Some(model.generator_names().to_vec()),
                    kind: "derivative_norm",
                    values,
                    set_influences,
                })
            })
            .collect::<Result<_, CliError>>()?,
        Family::Gauss { n, functions, .. } => functions
            .iter()
            .map(|(id, f)| {
                let (kind, values) = match f {
                    GaussFunction::Hermite(h) => {
                        let values = (0..n)
                            .map(|i| {
                                let d = h.partial_derivative(i)?;
                                d.lr_norm_converged(r, default_quad_order(&d), NORM_TOL)
                            })
                            .collect::<Result<_, _>>()?;
                        ("derivative_norm", values)
                    }
                    GaussFunction::Box(b) => {
                        let values = (0..n).map(|i| geometric_influence_halfspace(b, i)).collect::<Result<_, _>>()?;
                        ("geometric", values)
                    }
                };
                Ok(InfluenceEntry { function_id: id.clone(), labels: None, kind, values, set_influences: None })
            })
            .collect::<Result<_, CliError>>()?,
    };
    let rows: Vec<InfluenceRow> = entries
        .iter()
        .flat_map(|e| {
            e.values.iter().enumerate().map(move |(k, &value)| InfluenceRow {
                function_id: &e.function_id,
                coordinate: e.labels.as_ref().map_or_else(|| k.to_string(), |l| l[k].clone()),
                kind: e.kind,
                value,
                set_influence: e.set_influences.as_ref().map(|s| s[k]),
            })
        })
        .collect();
    let csv = to_csv(&rows);
    Ok((to_value(serde_json::json!({ "r": r, "functions": entries })), Some(csv), true))
}

#[derive(Serialize)]
struct StabilityRow {
    function_id: String,
    eta: f64,
    exact: f64,
    mc: Option<f64>,
    mc_stderr: Option<f64>,
}

fn stability(config: &RunConfig) -> Result<Produced, CliError> {
    let grid = match &config.grid {
        Some(g) => g.resolve(Clock::Noise)?,
        None => default_grid(Clock::Noise),
    };
    let samples = config.mc_samples;
    if samples == Some(0) {
        return Err(usage("--mc needs at least one sample"));
    }
    let seed = config.seed;
    let mut rows = Vec::new();
    let mut push = |id: &str, eta: f64, exact: f64, mc: Option<McEstimate>| {
        rows.push(StabilityRow {
            function_id: id.to_string(),
            eta,
            exact,
            mc: mc.map(|m| m.estimate),
            mc_stderr: mc.map(|m| m.stderr),
        })
    };
    let mut mc_agrees = true;
    match family(config)? {
        Family::Cube { functions, .. } => {
            for (id, f) in &functions {
                for &eta in &grid {
                    let exact = noise_stability(f, eta)?;
                    let mc = samples.map(|s| noise_stability_mc(f, eta, s, seed)).transpose()?;
                    mc_agrees &= mc.is_none_or(|m| m.agrees_with(exact, 6.0));
                    push(id, eta, exact, mc);
                }
            }
        }
        Family::Cayley { model, functions } => {
            if samples.is_some() {
                return Err(usage("Monte Carlo stability is available on cube and gaussian models"));
            }
            let evolution = SemigroupEvolution::new(Arc::new(model.generator()?))?;
            for (id, f) in &functions {
                for &eta in &grid {
                    let pf = evolution.apply(time_for_noise(eta)?, f)?;
                    let mean = f.mean();
                    push(id, eta, f.inner(&pf)? - mean * mean, None);
                }
            }
        }
        Family::Gauss { n, functions, .. } => {
            for (id, f) in &functions {
                for &eta in &grid {
                    let (exact, mc) = match f {
                        GaussFunction::Hermite(h) => (
                            h.noise_stability(eta)?,
                            samples.map(|s| gaussian_noise_stability_mc(|x| h.evaluate(x), n, eta, s, seed)).transpose()?,
                        ),
                        GaussFunction::Box(b) => (
                            gaussian_noise_stability_box(b, eta)?,
                            samples.map(|s| gaussian_noise_stability_mc(|x| b.indicator(x), n, eta, s, seed)).transpose()?,
                        ),
                    };
                    mc_agrees &= mc.is_none_or(|m| m.agrees_with(exact, 6.0));
                    push(id, eta, exact, mc);
                }
            }
        }
    }
    let csv = to_csv(&rows);
    Ok((to_value(serde_json::json!({ "rows": rows })), Some(csv), mc_agrees))
}

fn run_verify(config: &RunConfig) -> Result<Produced, CliError> {
    let bound = config.bound.as_ref().ok_or_else(|| usage("no bound given (use --bound)"))?;
    let spec = bound.to_spec(config.r());
    let grid = match &config.grid {
        Some(g) => g.resolve(bound.clock)?,
        None => default_grid(bound.clock),
    };
    let members: Vec<Member> = match family(config)? {
        Family::Cube { functions, .. } => {
            functions.into_iter().map(|(id, f)| Member::new(id, Subject::Cube(f))).collect()
        }
        Family::Cayley { model, functions } => {
            let setting = Arc::new(CayleySetting::new(model, config.seed)?);
            functions
                .into_iter()
                .map(|(id, function)| Member::new(id, Subject::Cayley { setting: Arc::clone(&setting), function }))
                .collect()
        }
        Family::Gauss { functions, .. } => functions
            .into_iter()
            .map(|(id, f)| match f {
                GaussFunction::Hermite(h) => Member::new(id, Subject::Hermite(h)),
                GaussFunction::Box(b) => Member::new(id, Subject::Box(b)),
            })
            .collect(),
    };
    let report = verify(&spec, &members, &grid)?;
    let passed = report.summary.passed;
    Ok((to_value(&report), Some(report.to_csv()), passed))
}

#[derive(Serialize)]
struct ConstantsReport {
    model: String,
    method: &'static str,
    spectral_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectral_gap_reference: Option<f64>,
    log_sobolev: f64,
    /// Best quotient reached by the search before capping at the gap.
    #[serde(skip_serializing_if = "Option::is_none")]
    log_sobolev_search: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_sobolev_reference: Option<f64>,
}

#[derive(Serialize)]
struct ConstantRow {
    quantity: &'static str,
    value: f64,
    reference: Option<f64>,
}

fn constants(config: &RunConfig) -> Result<Produced, CliError> {
    let model = config.model()?;
    let (evolution, gap_reference, log_sobolev_reference) = match (model, build_model(model)?) {
        (ModelSpec::Gaussian { .. }, _) => {
            let report = ConstantsReport {
                model: model.to_string(),
                method: "closed form",
                spectral_gap: 1.0,
                spectral_gap_reference: None,
                log_sobolev: 1.0,
                log_sobolev_search: None,
                log_sobolev_reference: None,
            };
            let rows = [
                ConstantRow { quantity: "spectral_gap", value: 1.0, reference: None },
                ConstantRow { quantity: "log_sobolev", value: 1.0, reference: None },
            ];
            return Ok((to_value(&report), Some(to_csv(&rows)), true));
        }
        (ModelSpec::Cube { n, p }, _) => (
            SemigroupEvolution::new(Arc::new(build_cube_generator(n, p)?))?,
            Some(1.0),
            Some(two_point_log_sobolev(p)),
        ),
        (_, Family::Cayley { model: cayley, .. }) => {
            let gap = match cayley.kind() {
                GroupKind::Symmetric { n } => 2.0 / (n as f64 - 1.0),
                GroupKind::Torus { m, n } => (1.0 - (2.0 * std::f64::consts::PI / m as f64).cos()) / n as f64,
            };
            (SemigroupEvolution::new(Arc::new(cayley.generator()?))?, Some(gap), None)
        }
        _ => unreachable!("finite models build finite families"),
    };
    let spectral_gap = evolution.spectral_gap()?;
    let estimate = log_sobolev_search(&evolution, LOG_SOBOLEV_RESTARTS, LOG_SOBOLEV_TOL, config.seed)?;
    let gap_ok = gap_reference.is_none_or(|g| (spectral_gap - g).abs() <= GAP_TOL * g.max(1.0));
    let log_sobolev_ok =
        log_sobolev_reference.is_none_or(|rho| (estimate.value - rho).abs() <= LOG_SOBOLEV_REL_TOL * rho);
    let report = ConstantsReport {
        model: model.to_string(),
        method: "spectral decomposition and variational search",
        spectral_gap,
        spectral_gap_reference: gap_reference,
        log_sobolev: estimate.value,
        log_sobolev_search: Some(estimate.search_value),
        log_sobolev_reference,
    };
    let rows = [
        ConstantRow { quantity: "spectral_gap", value: spectral_gap, reference: gap_reference },
        ConstantRow { quantity: "log_sobolev", value: estimate.value, reference: log_sobolev_reference },
    ];
    Ok((to_value(&report), Some(to_csv(&rows)), gap_ok && log_sobolev_ok))
}

#[derive(Serialize)]
struct JuntaRow<'a> {
    function_id: &'a str,
    t: f64,
    eta: f64,
    size: usize,
    l1_error: f64,
    l2_tail: Option<f64>,
    tail_bound: Option<f64>,
}

/// Borrowed junta targets of a family, in order.
fn junta_targets(family: &Family) -> Result<Vec<(&str, JuntaTarget<'_>)>, CliError> {
    match family {
        Family::Cube { functions, .. } => Ok(functions.iter().map(|(id, f)| (id.as_str(), JuntaTarget::Cube(f))).collect()),
        Family::Cayley { model, functions } => {
            if !matches!(model.kind(), GroupKind::Torus { .. }) {
                return Err(usage("junta approximation runs on cube, torus and gaussian models"));
            }
            Ok(functions.iter().map(|(id, f)| (id.as_str(), JuntaTarget::Torus { model, function: f })).collect())
        }
        Family::Gauss { functions, .. } => functions
            .iter()
            .map(|(id, f)| match f {
                GaussFunction::Hermite(h) => Ok((id.as_str(), JuntaTarget::Hermite(h))),
                GaussFunction::Box(_) => Err(usage("junta approximation in Gauss space needs a Hermite expansion")),
            })
            .collect(),
    }
}

fn junta(config: &RunConfig) -> Result<Produced, CliError> {
    let family = family(config)?;
    let targets = junta_targets(&family)?;
    if let Some(epsilon) = config.epsilon {
        let mut reports = Vec::new();
        let mut rows = Vec::new();
        let mut passed = true;
        for (id, target) in &targets {
            let report = friedgut_check(*target, epsilon)?;
            if let Some(best) = report.best {
                rows.push(JuntaRow {
                    function_id: id,
                    t: best.t,
                    eta: best.eta,
                    size: best.junta_size,
                    l1_error: best.l1_error,
                    l2_tail: None,
                    tail_bound: None,
                });
            }
            passed &= report.best.is_some();
            reports.push(serde_json::json!({ "function_id": id, "search": report }));
        }
        return Ok((to_value(serde_json::json!({ "epsilon": epsilon, "functions": reports })), Some(to_csv(&rows)), passed));
    }
    let t = config.t.ok_or_else(|| usage("junta needs --t (or --epsilon)"))?;
    let eta = config.eta.ok_or_else(|| usage("junta needs --eta (or --epsilon)"))?;
    let rounding = config.rounding.unwrap_or_default();
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut passed = true;
    for (id, target) in &targets {
        let result = junta_extract(*target, t, eta, rounding)?;
        if let Some(bound) = result.tail_bound {
            passed &= result.l2_tail <= bound * (1.0 + 1e-9) + 1e-12;
        }
        rows.push(JuntaRow {
            function_id: id,
            t,
            eta,
            size: result.size(),
            l1_error: result.l1_error,
            l2_tail: Some(result.l2_tail),
            tail_bound: result.tail_bound,
        });
        results.push(serde_json::json!({ "function_id": id, "junta": result }));
    }
    Ok((to_value(serde_json::json!({ "functions": results })), Some(to_csv(&rows)), passed))
}
