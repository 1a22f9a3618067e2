//! Building the function family a command runs on.

use std::path::Path;

use noisestab::boolean::{builtins, parse_function_text, CubeFunction};
use noisestab::gauss::{HalfspaceBox, HermiteExpansion, MultiIndexSet};
use noisestab::groups::{build_symmetric_group, build_torus, CayleyModel, GroupKind};
use noisestab::space::TableFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::config::{FunctionSpec, ModelSpec};
use crate::error::{usage, CliError};

/// A function on Gauss space: a Hermite expansion or the indicator of a box.
#[derive(Debug, Clone)]
pub enum GaussFunction {
    Hermite(HermiteExpansion),
    Box(HalfspaceBox),
}

/// The model together with its named functions.
#[derive(Debug, Clone)]
pub enum Family {
    Cube { n: usize, p: f64, functions: Vec<(String, CubeFunction)> },
    Cayley { model: CayleyModel, functions: Vec<(String, TableFunction)> },
    Gauss { n: usize, degree: usize, functions: Vec<(String, GaussFunction)> },
}

impl Family {
    pub fn ids(&self) -> Vec<&str> {
        match self {
            Family::Cube { functions, .. } => functions.iter().map(|(id, _)| id.as_str()).collect(),
            Family::Cayley { functions, .. } => functions.iter().map(|(id, _)| id.as_str()).collect(),
            Family::Gauss { functions, .. } => functions.iter().map(|(id, _)| id.as_str()).collect(),
        }
    }
}

/// Builds the model without any functions.
pub fn build_model(model: ModelSpec) -> Result<Family, CliError> {
    Ok(match model {
        ModelSpec::Cube { n, p } => {
            // validates n and p
            CubeFunction::constant(n, p, 0.0)?;
            Family::Cube { n, p, functions: Vec::new() }
        }
        ModelSpec::Torus { m, n } => Family::Cayley { model: build_torus(m, n)?, functions: Vec::new() },
        ModelSpec::Symmetric { n } => Family::Cayley { model: build_symmetric_group(n)?, functions: Vec::new() },
        ModelSpec::Gaussian { n, degree } => {
            if n == 0 {
                return Err(usage("gaussian models need n ≥ 1"));
            }
            Family::Gauss { n, degree, functions: Vec::new() }
        }
    })
}

/// Builds every function of `specs`; random entries draw from one stream
/// seeded by `seed`, in the order given.
pub fn build_family(model: ModelSpec, specs: &[FunctionSpec], seed: u64) -> Result<Family, CliError> {
    if specs.is_empty() {
        return Err(usage("no functions given (use --fn)"));
    }
    let mut family = build_model(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for spec in specs {
        let id = spec.to_string();
        match &mut family {
            Family::Cube { n, p, functions } => {
                for (k, f) in cube_functions(*n, *p, spec, &mut rng)?.into_iter().enumerate() {
                    functions.push((member_id(&id, spec, k), f));
                }
            }
            Family::Cayley { model, functions } => {
                for (k, f) in cayley_functions(model, spec, &mut rng)?.into_iter().enumerate() {
                    functions.push((member_id(&id, spec, k), f));
                }
            }
            Family::Gauss { n, degree, functions } => {
                for (k, f) in gauss_functions(*n, *degree, spec, &mut rng)?.into_iter().enumerate() {
                    functions.push((member_id(&id, spec, k), f));
                }
            }
        }
    }
    Ok(family)
}

fn member_id(id: &str, spec: &FunctionSpec, k: usize) -> String {
    match spec {
        FunctionSpec::Random { .. } => format!("random#{k}"),
        _ => id.to_string(),
    }
}

fn unsupported(spec: &FunctionSpec, model: &str) -> CliError {
    usage(format!("`{spec}` is not available on {model} models"))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn random_indicator(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect()
}

fn cube_functions(n: usize, p: f64, spec: &FunctionSpec, rng: &mut ChaCha8Rng) -> Result<Vec<CubeFunction>, CliError> {
    let uniform = match spec {
        FunctionSpec::Dictator { i, codomain } => builtins::dictator(n, *i, *codomain)?,
        FunctionSpec::Parity { codomain } => builtins::parity(n, *codomain)?,
        FunctionSpec::Majority { codomain } => builtins::majority(n, *codomain)?,
        FunctionSpec::Tribes { width, codomain } => builtins::tribes(*width, n, *codomain)?,
        FunctionSpec::Constant { c } => CubeFunction::constant(n, p, *c)?,
        FunctionSpec::File { path } => {
            let f = parse_function_text(&read(path)?, p)?;
            if f.n() != n {
                return Err(usage(format!("{} has {} coordinates, the model has {n}", path.display(), f.n())));
            }
            return Ok(vec![f]);
        }
        FunctionSpec::Random { count } => {
            return (0..*count)
                .map(|_| Ok(CubeFunction::new(n, p, random_indicator(1 << n, rng))?))
                .collect();
        }
        _ => return Err(unsupported(spec, "cube")),
    };
    Ok(vec![if p == 0.5 { uniform } else { uniform.with_bias(p)? }])
}

fn cayley_functions(
    model: &CayleyModel,
    spec: &FunctionSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<TableFunction>, CliError> {
    let f = match (spec, model.kind()) {
        (FunctionSpec::Constant { c }, _) => model.function(|_| *c),
        (FunctionSpec::Random { count }, _) => {
            return (0..*count).map(|_| Ok(model.function(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }))).collect();
        }
        (FunctionSpec::Coordinate { k, value }, GroupKind::Torus { m, n }) => {
            if *k >= n || *value >= m {
                return Err(usage(format!("coordinate:k={k},value={value} is outside the torus ℤ_{m}^{n}")));
            }
            let space = model.space().clone();
            model.function(|g| if space.digit(g, *k) == *value { 1.0 } else { 0.0 })
        }
        (FunctionSpec::Fixes { i }, GroupKind::Symmetric { n }) => {
            if *i >= n {
                return Err(usage(format!("fixes:i={i} needs i < {n}")));
            }
            let table: Vec<f64> = (0..model.order())
                .map(|g| if model.permutation(g).is_some_and(|s| s[*i] as usize == *i) { 1.0 } else { 0.0 })
                .collect();
            TableFunction::new(model.space().clone(), table)?
        }
        (_, GroupKind::Torus { .. }) => return Err(unsupported(spec, "torus")),
        (_, GroupKind::Symmetric { .. }) => return Err(unsupported(spec, "symmetric-group")),
    };
    Ok(vec![f])
}

/// Coefficients of a Hermite expansion, as read from a `hermite:` file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HermiteFile {
    n: usize,
    degree: usize,
    terms: Vec<HermiteTerm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HermiteTerm {
    index: Vec<u32>,
    coefficient: f64,
}

fn gauss_functions(
    n: usize,
    degree: usize,
    spec: &FunctionSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<GaussFunction>, CliError> {
    let f = match spec {
        FunctionSpec::Halfspace { a } => {
            let mut thresholds = vec![f64::INFINITY; n];
            thresholds[0] = *a;
            GaussFunction::Box(HalfspaceBox::gaussian(thresholds)?)
        }
        FunctionSpec::Box { thresholds } => {
            if thresholds.len() != n {
                return Err(usage(format!("box has {} thresholds, the model has n = {n}", thresholds.len())));
            }
            GaussFunction::Box(HalfspaceBox::gaussian(thresholds.clone())?)
        }
        FunctionSpec::Constant { c } => GaussFunction::Hermite(HermiteExpansion::constant(n, degree, *c)),
        FunctionSpec::Hermite { path } => {
            let file: HermiteFile =
                serde_json::from_str(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            if file.n != n {
                return Err(usage(format!("{} has n = {}, the model has n = {n}", path.display(), file.n)));
            }
            let terms: Vec<(Vec<u32>, f64)> = file.terms.into_iter().map(|t| (t.index, t.coefficient)).collect();
            GaussFunction::Hermite(HermiteExpansion::from_terms(n, file.degree, &terms)?)
        }
        FunctionSpec::Random { count } => {
            let basis = MultiIndexSet::new(n, degree);
            return (0..*count)
                .map(|_| {
                    let terms: Vec<(Vec<u32>, f64)> = basis
                        .indices()
                        .iter()
                        .map(|alpha| {
                            let size: u32 = alpha.iter().sum();
                            let z: f64 = rng.sample(StandardNormal);
                            (alpha.clone(), z * 0.5f64.powi(size as i32))
                        })
                        .collect();
                    Ok(GaussFunction::Hermite(HermiteExpansion::from_terms(n, degree, &terms)?))
                })
                .collect();
        }
        _ => return Err(unsupported(spec, "gaussian")),
    };
    Ok(vec![f])
}
