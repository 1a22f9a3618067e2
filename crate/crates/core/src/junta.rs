//! Junta approximation through `E_S ∘ P_t`.
//!
//! Coordinates whose `L¹` influence reaches a threshold `η` are kept, the
//! smoothed function `P_t f` is averaged over the rest, and two-valued
//! targets are rounded back to their values.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolean::{fourier_transform, CubeFunction};
use crate::error::{invalid, Error, Result};
use crate::gauss::{default_quad_order, HermiteExpansion};
use crate::groups::{CayleyModel, GroupKind};
use crate::space::TableFunction;

/// Times searched by [`friedgut_check`].
pub const SEARCH_TIMES: [f64; 4] = [0.1, 0.2, 0.4, 0.8];
/// Thresholds `2^{−k}`, `k = 1..=SEARCH_LEVELS`, searched by [`friedgut_check`].
pub const SEARCH_LEVELS: u32 = 8;
/// Half-width of the box on which Gaussian sup norms are estimated.
pub const SUP_BOX: f64 = 4.0;

const L1_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Two-valued targets are rounded to the nearer value, ties to the lower.
    #[default]
    Nearest,
    None,
}

/// The function to approximate.
#[derive(Debug, Clone, Copy)]
pub enum JuntaTarget<'a> {
    Cube(&'a CubeFunction),
    Torus { model: &'a CayleyModel, function: &'a TableFunction },
    Hermite(&'a HermiteExpansion),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Approximant {
    Table { values: Vec<f64> },
    Hermite { n: usize, degree: usize, coefficients: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JuntaParams {
    pub t: f64,
    pub eta: f64,
    pub rounding: Rounding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JuntaResult {
    /// Retained coordinates, increasing.
    pub coordinates: Vec<usize>,
    /// `‖D_k f‖₁` (or `‖∂_k f‖₁`) for every coordinate.
    pub influences: Vec<f64>,
    pub g: Approximant,
    /// `‖f − g‖₁`.
    pub l1_error: f64,
    /// `‖P_t f − E_S P_t f‖₂`.
    pub l2_tail: f64,
    pub params: JuntaParams,
    /// Gaussian only: `M η_M^{(1−e^{−2t})/(2(1+e^{−2t}))}` with `η_M = η/M`,
    /// the tail bound for `f/M` scaled back, `M` the sup of `|f|` on the box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_estimate: Option<f64>,
}

impl JuntaResult {
    pub fn size(&self) -> usize {
        self.coordinates.len()
    }
}

/// `c^{−1/2} η^{(1−e^{−2ct})/(2(1+e^{−2ct}))}`.
pub fn tail_bound(eta: f64, t: f64, c: f64) -> Result<f64> {
    if !(eta > 0.0) || !(t >= 0.0) || !(c > 0.0) {
        return Err(invalid("tail bound needs η > 0, t ≥ 0, c > 0"));
    }
    let e = (-2.0 * c * t).exp();
    Ok(c.powf(-0.5) * eta.powf((1.0 - e) / (2.0 * (1.0 + e))))
}

fn check_params(t: f64, eta: f64) -> Result<()> {
    if !(t > 0.0) || t.is_infinite() {
        return Err(invalid(format!("time {t} must be positive and finite")));
    }
    if !(eta > 0.0) {
        return Err(invalid(format!("threshold η = {eta} must be positive")));
    }
    Ok(())
}

/// The two values of a two-valued table, increasing; `None` otherwise.
fn two_values(values: &[f64]) -> Option<(f64, f64)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo < hi && values.iter().all(|&v| v == lo || v == hi)).then_some((lo, hi))
}

fn round_to(values: &mut [f64], (lo, hi): (f64, f64)) {
    let mid = 0.5 * (lo + hi);
    for v in values {
        *v = if *v > mid { hi } else { lo };
    }
}

fn weighted_l1(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    a.iter().zip(b).zip(weights).map(|((x, y), w)| (x - y).abs() * w).sum()
}

fn weighted_l2(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    a.iter().zip(b).zip(weights).map(|((x, y), w)| (x - y) * (x - y) * w).sum::<f64>().sqrt()
}

fn select(influences: &[f64], eta: f64) -> Vec<usize> {
    (0..influences.len()).filter(|&k| influences[k] >= eta).collect()
}

/// Approximates `f` by `E_S(P_t f)` with `S = {k : ‖D_k f‖₁ ≥ η}`.
///
/// An empty `S` gives the constant `E f`.
pub fn junta_extract(target: JuntaTarget, t: f64, eta: f64, rounding: Rounding) -> Result<JuntaResult> {
    let mut results = junta_sweep(target, &[(t, eta)], rounding)?;
    Ok(results.remove(0))
}

/// [`junta_extract`] over a list of `(t, η)` cells, sharing the influence
/// computation; results follow the order of `cells`.
pub fn junta_sweep(target: JuntaTarget, cells: &[(f64, f64)], rounding: Rounding) -> Result<Vec<JuntaResult>> {
    for &(t, eta) in cells {
        check_params(t, eta)?;
    }
    let prepared = Prepared::new(target)?;
    cells.par_iter().map(|&(t, eta)| prepared.extract(JuntaParams { t, eta, rounding })).collect()
}

/// Per-target data shared by every `(t, η)` cell.
enum Prepared<'a> {
    Cube { f: &'a CubeFunction, influences: Vec<f64> },
    Torus { model: &'a CayleyModel, f: &'a TableFunction, semigroup: TorusSemigroup, influences: Vec<f64> },
    Hermite { f: &'a HermiteExpansion, influences: Vec<f64>, sup: f64 },
}

impl<'a> Prepared<'a> {
    fn new(target: JuntaTarget<'a>) -> Result<Self> {
        Ok(match target {
            JuntaTarget::Cube(f) => Prepared::Cube { f, influences: f.influences(1.0)? },
            JuntaTarget::Torus { model, function } => Prepared::Torus {
                model,
                f: function,
                semigroup: TorusSemigroup::new(model)?,
                influences: torus_influences(model, function)?,
            },
            JuntaTarget::Hermite(f) => Prepared::Hermite { f, influences: hermite_influences(f)?, sup: sup_on_box(f) },
        })
    }

    fn influences(&self) -> &[f64] {
        match self {
            Prepared::Cube { influences, .. }
            | Prepared::Torus { influences, .. }
            | Prepared::Hermite { influences, .. } => influences,
        }
    }

    fn extract(&self, params: JuntaParams) -> Result<JuntaResult> {
        match self {
            Prepared::Cube { f, influences } => extract_cube(f, influences, params),
            Prepared::Torus { model, f, semigroup, influences } => extract_torus(model, f, semigroup, influences, params),
            Prepared::Hermite { f, influences, sup } => extract_hermite(f, influences, *sup, params),
        }
    }
}

fn extract_cube(f: &CubeFunction, influences: &[f64], params: JuntaParams) -> Result<JuntaResult> {
    let coordinates = select(influences, params.eta);
    let mask = coordinates.iter().fold(0usize, |m, &k| m | (1 << k));
    let smoothed = fourier_transform(f).damped(params.t);
    let kept = smoothed.restricted(mask);
    let l2_tail = smoothed
        .coefficients()
        .iter()
        .zip(kept.coefficients())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let mut g = kept.inverse().values().to_vec();
    if params.rounding == Rounding::Nearest {
        if let Some(pair) = two_values(f.values()) {
            round_to(&mut g, pair);
        }
    }
    let weights = f.weights();
    Ok(JuntaResult {
        l1_error: weighted_l1(f.values(), &g, &weights),
        coordinates,
        influences: influences.to_vec(),
        g: Approximant::Table { values: g },
        l2_tail,
        params,
        tail_bound: None,
        sup_estimate: None,
    })
}

/// `e^{tL}` for the torus walk, applied coordinate by coordinate.
///
/// The walk generator is `Σ_i A_i` with `A_i` acting on coordinate `i`
/// alone, so `e^{tL} = ⊗_i e^{tA}`.
struct TorusSemigroup {
    m: usize,
    n: usize,
    /// Eigen-decomposition of the one-coordinate generator.
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl TorusSemigroup {
    fn new(model: &CayleyModel) -> Result<Self> {
        let GroupKind::Torus { m, n } = model.kind() else {
            return Err(Error::ModelMismatch("coordinate juntas need a torus".into()));
        };
        let count = model.generator_count() as f64;
        let mut a = DMatrix::zeros(m, m);
        for x in 0..m {
            for y in [(x + 1) % m, (x + m - 1) % m] {
                a[(x, y)] += 1.0 / count;
                a[(x, x)] -= 1.0 / count;
            }
        }
        if m == 2 {
            // ±e_i coincide and count once
            a /= 2.0;
        }
        let eig = a.symmetric_eigen();
        Ok(Self { m, n, eigenvalues: eig.eigenvalues.iter().copied().collect(), eigenvectors: eig.eigenvectors })
    }

    fn apply(&self, t: f64, values: &[f64]) -> Vec<f64> {
        let v = &self.eigenvectors;
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.m,
            self.eigenvalues.iter().map(|l| (t * l).exp()),
        ));
        let kernel = v * diag * v.transpose();
        let mut cur = values.to_vec();
        let mut stride = 1;
        for _ in 0..self.n {
            let block = stride * self.m;
            let mut out = vec![0.0; cur.len()];
            for base in (0..cur.len()).step_by(block) {
                for low in 0..stride {
                    let start = base + low;
                    for x in 0..self.m {
                        out[start + x * stride] = (0..self.m).map(|y| kernel[(x, y)] * cur[start + y * stride]).sum();
                    }
                }
            }
            cur = out;
            stride = block;
        }
        cur
    }
}

/// `‖f(· + e_k) − f‖₁` for every coordinate `k`.
fn torus_influences(model: &CayleyModel, f: &TableFunction) -> Result<Vec<f64>> {
    let GroupKind::Torus { m, n } = model.kind() else {
        return Err(Error::ModelMismatch("coordinate juntas need a torus".into()));
    };
    (0..n)
        .map(|k| {
            let name = if m == 2 { format!("e{k}") } else { format!("+e{k}") };
            let s = model.generator_index(&name).expect("torus generator names");
            model.derivative_norm(f, s, 1.0)
        })
        .collect()
}

fn extract_torus(
    model: &CayleyModel,
    f: &TableFunction,
    semigroup: &TorusSemigroup,
    influences: &[f64],
    params: JuntaParams,
) -> Result<JuntaResult> {
    if !std::sync::Arc::ptr_eq(f.space(), model.space()) && f.space().weights() != model.space().weights() {
        return Err(Error::ModelMismatch("function does not live on the torus".into()));
    }
    let coordinates = select(influences, params.eta);
    let smoothed = f.with_values(semigroup.apply(params.t, f.values()))?;
    let kept = smoothed.conditional_expectation(&coordinates)?;
    let weights = f.space().weights();
    let l2_tail = weighted_l2(smoothed.values(), kept.values(), weights);
    let mut g = kept.into_values();
    if params.rounding == Rounding::Nearest {
        if let Some(pair) = two_values(f.values()) {
            round_to(&mut g, pair);
        }
    }
    Ok(JuntaResult {
        l1_error: weighted_l1(f.values(), &g, weights),
        coordinates,
        influences: influences.to_vec(),
        g: Approximant::Table { values: g },
        l2_tail,
        params,
        tail_bound: None,
        sup_estimate: None,
    })
}

/// Largest `|f|` on a uniform grid of `[−SUP_BOX, SUP_BOX]^n`.
pub fn sup_on_box(f: &HermiteExpansion) -> f64 {
    let n = f.n();
    let per_axis: usize = match n {
        1 => 801,
        2 => 161,
        3 => 49,
        _ => 17,
    };
    let step = 2.0 * SUP_BOX / (per_axis - 1) as f64;
    let total = per_axis.pow(n as u32);
    (0..total)
        .into_par_iter()
        .map(|mut k| {
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    let j = k % per_axis;
                    k /= per_axis;
                    -SUP_BOX + step * j as f64
                })
                .collect();
            f.evaluate(&x).abs()
        })
        .reduce(|| 0.0, f64::max)
}

fn hermite_influences(f: &HermiteExpansion) -> Result<Vec<f64>> {
    (0..f.n())
        .map(|i| {
            let d = f.partial_derivative(i)?;
            if d.coefficients().iter().all(|&c| c == 0.0) {
                return Ok(0.0);
            }
            d.lr_norm_converged(1.0, default_quad_order(&d), L1_TOL)
        })
        .collect()
}

fn extract_hermite(f: &HermiteExpansion, influences: &[f64], sup: f64, params: JuntaParams) -> Result<JuntaResult> {
    let coordinates = select(influences, params.eta);
    let smoothed = f.ou_apply(params.t)?;
    let terms: Vec<(Vec<u32>, f64)> = smoothed
        .basis()
        .indices()
        .iter()
        .zip(smoothed.coefficients())
        .filter(|(a, _)| a.iter().enumerate().all(|(k, &d)| d == 0 || coordinates.contains(&k)))
        .map(|(a, &c)| (a.clone(), c))
        .collect();
    let g = HermiteExpansion::from_terms(f.n(), f.degree(), &terms)?;
    let tail = smoothed.linear_combination(1.0, &g, -1.0)?;
    let diff = f.linear_combination(1.0, &g, -1.0)?;
    let l1_error = if diff.coefficients().iter().all(|&c| c == 0.0) {
        0.0
    } else {
        diff.lr_norm_converged(1.0, default_quad_order(&diff), L1_TOL)?
    };
    let tail_bound = if sup > 0.0 { Some(sup * tail_bound(params.eta / sup, params.t, 1.0)?) } else { None };
    Ok(JuntaResult {
        coordinates,
        influences: influences.to_vec(),
        g: Approximant::Hermite { n: g.n(), degree: g.degree(), coefficients: g.coefficients().to_vec() },
        l1_error,
        l2_tail: tail.l2_norm(),
        params,
        tail_bound,
        sup_estimate: Some(sup),
    })
}

/// One grid cell of [`friedgut_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedgutCell {
    pub t: f64,
    pub eta: f64,
    pub junta_size: usize,
    pub l1_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedgutReport {
    /// `Σ_k ‖D_k f‖₁`.
    pub total_influence: f64,
    pub epsilon: f64,
    /// Smallest junta reaching `ε`, ties broken by error then grid order.
    pub best: Option<FriedgutCell>,
    pub cells: Vec<FriedgutCell>,
}

impl FriedgutReport {
    /// `(junta_size, achieved_error)` of the best cell.
    pub fn outcome(&self) -> Option<(usize, f64)> {
        self.best.map(|c| (c.junta_size, c.l1_error))
    }
}

/// Searches `SEARCH_TIMES × {2^{−k}}` for the smallest junta with
/// `‖f − g‖₁ ≤ ε`.
pub fn friedgut_check(target: JuntaTarget, epsilon: f64) -> Result<FriedgutReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("ε = {epsilon} must lie in (0, 1)")));
    }
    let grid: Vec<(f64, f64)> = SEARCH_TIMES
        .iter()
        .flat_map(|&t| (1..=SEARCH_LEVELS).map(move |k| (t, 0.5f64.powi(k as i32))))
        .collect();
    let values = match target {
        JuntaTarget::Cube(f) => f.values(),
        JuntaTarget::Torus { function, .. } => function.values(),
        JuntaTarget::Hermite(_) => {
            return Err(Error::ModelMismatch("junta search runs on cube or torus indicators".into()));
        }
    };
    if two_values(values).is_none() {
        return Err(Error::Domain("junta search needs a two-valued function".into()));
    }
    let prepared = Prepared::new(target)?;
    let cells: Vec<FriedgutCell> = grid
        .par_iter()
        .map(|&(t, eta)| prepared.extract(JuntaParams { t, eta, rounding: Rounding::Nearest }).map(|r| cell(&r)))
        .collect::<Result<_>>()?;
    let influences = prepared.influences();
    let best = cells
        .iter()
        .filter(|c| c.l1_error <= epsilon)
        .min_by(|a, b| a.junta_size.cmp(&b.junta_size).then(a.l1_error.total_cmp(&b.l1_error)))
        .copied();
    Ok(FriedgutReport { total_influence: influences.iter().sum(), epsilon, best, cells })
}

fn cell(r: &JuntaResult) -> FriedgutCell {
    FriedgutCell { t: r.params.t, eta: r.params.eta, junta_size: r.size(), l1_error: r.l1_error }
}
