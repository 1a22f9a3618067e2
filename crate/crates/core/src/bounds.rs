//! Right-hand sides of the noise-stability inequalities and a sweep engine
//! comparing them with exact left-hand sides.
//!
//! Every inequality bounds `Var(P_t f)` (or the noise covariance
//! `Cov(f, P_t f)`) by a power of an influence sum times a power of
//! `‖f‖₂`. [`verify`] evaluates both sides over a function family and a
//! time or noise grid.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolean::{fourier_transform, two_point_log_sobolev, CubeFunction};
use crate::error::{invalid, Error, Result};
use crate::gauss::{
    default_quad_order, gaussian_noise_stability_box, geometric_influence_halfspace, HalfspaceBox, HermiteExpansion,
    LineMeasure,
};
use crate::groups::{CayleyModel, GroupKind};
use crate::markov::{log_sobolev_constant, SemigroupEvolution};
use crate::space::TableFunction;

/// Tolerance on `ratio ≤ 1` for exactly computed models.
pub const EXACT_SLACK: f64 = 1e-9;
/// Tolerance on `ratio ≤ 1` when influences come from quadrature.
pub const QUADRATURE_SLACK: f64 = 1e-6;
pub const DEFAULT_GRID_POINTS: usize = 16;
pub const DEFAULT_GRID_RANGE: (f64, f64) = (0.05, 5.0);

/// Quadrature tolerance for Gaussian derivative norms.
const NORM_TOL: f64 = 1e-9;

/// `r(1 − e^{−ρt}) / (2(1 + (1 − r)e^{−ρt}))`.
pub fn alpha(t: f64, r: f64, rho: f64) -> Result<f64> {
    check_t(t)?;
    check_r(r)?;
    check_positive("ρ", rho)?;
    let e = (-rho * t).exp();
    Ok(r * (1.0 - e) / (2.0 * (1.0 + (1.0 - r) * e)))
}

/// Exponent of the gradient-normalized bound, `r / (r + (2 − r) coth(ct))`.
pub fn improved_alpha(t: f64, r: f64, c: f64) -> Result<f64> {
    check_t(t)?;
    check_r(r)?;
    check_positive("c", c)?;
    let th = (c * t).tanh();
    Ok(r * th / (r * th + 2.0 - r))
}

/// `Σ_i ‖∇_i f‖_r²` from the per-direction norms.
pub fn s_r(norms: &[f64]) -> f64 {
    norms.iter().map(|v| v * v).sum()
}

/// `pq Σ_i ‖D_i f‖₁²`.
pub fn w_of_f(f: &CubeFunction) -> f64 {
    let p = f.p();
    let norms: Vec<f64> = (0..f.n()).map(|i| f.influence(i, 1.0).expect("coordinate in range")).collect();
    p * (1.0 - p) * s_r(&norms)
}

/// `2(1 − e^{−t}) − (1 − e^{−2t})`, which equals `(1 − e^{−t})²`.
pub fn exponent_gap(t: f64) -> f64 {
    2.0 * (1.0 - (-t).exp()) - (1.0 - (-2.0 * t).exp())
}

/// `base^exp` with `0^0 = 1` and `0^e = 0` for `e > 0`.
fn pow0(base: f64, exp: f64) -> f64 {
    if base <= 0.0 {
        if exp == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        base.powf(exp)
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0) || t.is_infinite() {
        return Err(invalid(format!("time {t} must be finite and nonnegative")));
    }
    Ok(())
}

fn check_r(r: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&r) {
        return Err(invalid(format!("exponent r = {r} must lie in [1, 2]")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || v.is_infinite() {
        return Err(invalid(format!("{name} = {v} must be positive and finite")));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eta) {
        return Err(invalid(format!("noise rate η = {eta} must lie in [0, 1)")));
    }
    Ok(())
}

/// Uniform cube: `7 (Σ‖D_i f‖₁²)^{(1−e^{−t})/2} ‖f‖₂^{1+e^{−t}}`.
pub fn rhs_cube_l1(sum_sq: f64, l2: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    let e = (-t).exp();
    Ok(7.0 * pow0(sum_sq, (1.0 - e) / 2.0) * pow0(l2, 1.0 + e))
}

/// Uniform cube noise form: `7 (Σ I_i²)^{η/4} ‖f‖₂^{3η/2}`.
pub fn rhs_cube_noise(sum_sq: f64, l2: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(7.0 * pow0(sum_sq, eta / 4.0) * pow0(l2, 1.5 * eta))
}

/// `c₁ (Σ I_i²)^{c₂η}`.
pub fn rhs_cube_free(sum_sq: f64, eta: f64, c1: f64, c2: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(c1 * pow0(sum_sq, c2 * eta))
}

/// Gaussian: `4e^{−t} (Σ‖∂_i f‖₁²)^{(1−e^{−t})/2} ‖f‖₂^{1+e^{−t}}`.
pub fn rhs_gauss_l1(sum_sq: f64, l2: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    let e = (-t).exp();
    Ok(4.0 * e * pow0(sum_sq, (1.0 - e) / 2.0) * pow0(l2, 1.0 + e))
}

/// Gaussian sets: `4(1−η²)^{1/4} (Σ I_i^G(A)²)^{η²/4} μ(A)^{3η²/2}`.
pub fn rhs_gauss_sets(sum_sq: f64, measure: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let e2 = eta * eta;
    Ok(4.0 * (1.0 - e2).powf(0.25) * pow0(sum_sq, e2 / 4.0) * pow0(measure, 1.5 * e2))
}

/// [`rhs_gauss_l1`] for `1_A` at the time where `e^{−t} = (1−η²)^{1/4}`, the
/// form that the set version is derived from.
pub fn rhs_gauss_sets_theorem(sum_sq: f64, measure: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let u = (1.0 - eta * eta).powf(0.25);
    Ok(4.0 * u * pow0(sum_sq, (1.0 - u) / 2.0) * pow0(measure, (1.0 + u) / 2.0))
}

/// `C₁ (Σ‖∂_i f‖₁²)^{C₂η²}`.
pub fn rhs_gauss_free(sum_sq: f64, eta: f64, c1: f64, c2: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(c1 * pow0(sum_sq, c2 * eta * eta))
}

/// Log-concave measure with curvature `c` and log-Sobolev constant `ρ`:
/// `max(4, 4/c) e^{−ct} 𝒮_r^{α(t)} ‖f‖₂^{2−2α(t)}`.
pub fn rhs_log_concave(s: f64, l2: f64, t: f64, r: f64, rho: f64, c: f64) -> Result<f64> {
    check_positive("c", c)?;
    let a = alpha(t, r, rho)?;
    Ok(4f64.max(4.0 / c) * (-c * t).exp() * pow0(s, a) * pow0(l2, 2.0 - 2.0 * a))
}

/// Product spaces: `7 (Σ‖L_i f‖_r²)^{α(t)} ‖f‖₂^{2−2α(t)}`.
pub fn rhs_product_lr(s: f64, l2: f64, t: f64, r: f64, rho: f64) -> Result<f64> {
    let a = alpha(t, r, rho)?;
    Ok(7.0 * pow0(s, a) * pow0(l2, 2.0 - 2.0 * a))
}

/// Biased cube: `7 𝒲(f)^{(1−e^{−ρt})/2} ‖f‖₂^{1+e^{−ρt}}`.
pub fn rhs_biased(w: f64, l2: f64, t: f64, rho: f64) -> Result<f64> {
    check_t(t)?;
    check_positive("ρ", rho)?;
    let e = (-rho * t).exp();
    Ok(7.0 * pow0(w, (1.0 - e) / 2.0) * pow0(l2, 1.0 + e))
}

/// Uniform cube noise form of the `𝒲` bound: `7 𝒲(f)^{ε/4} ‖f‖₂^{2−ε/2}`.
///
/// Stated for `‖f‖₂ = 1`; the `‖f‖₂` factor makes it homogeneous of degree 2.
pub fn rhs_uniform_noise(w: f64, l2: f64, eps: f64) -> Result<f64> {
    check_eta(eps)?;
    Ok(7.0 * pow0(w, eps / 4.0) * pow0(l2, 2.0 - eps / 2.0))
}

/// Sphere `S^{n−1}`, where the gap and log-Sobolev constant are both `n − 1`:
/// `7 (Σ_{i,j}‖D_{ij} f‖_r²)^{α(t)} ‖f‖₂^{2−2α(t)}`.
pub fn rhs_sphere(s: f64, l2: f64, t: f64, r: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(invalid("the sphere bound needs n ≥ 2"));
    }
    rhs_product_lr(s, l2, t, r, (n - 1) as f64)
}

/// Symmetric group: `(C/n) (Σ_τ‖D_τ f‖_r²)^{α(t)} ‖f‖₂^{2−2α(t)}`.
pub fn rhs_symmetric(s: f64, l2: f64, t: f64, r: f64, rho: f64, n: usize, constant: f64) -> Result<f64> {
    check_positive("C", constant)?;
    let a = alpha(t, r, rho)?;
    Ok(constant / n as f64 * pow0(s, a) * pow0(l2, 2.0 - 2.0 * a))
}

/// Cayley graph: `(C/λ) (Σ_s‖D_s f‖_r²)^{α(t)} ‖f‖₂^{2−2α(t)}`.
pub fn rhs_cayley(s: f64, l2: f64, t: f64, r: f64, rho: f64, lambda: f64, constant: f64) -> Result<f64> {
    check_positive("C", constant)?;
    check_positive("λ", lambda)?;
    let a = alpha(t, r, rho)?;
    Ok(constant / lambda * pow0(s, a) * pow0(l2, 2.0 - 2.0 * a))
}

/// `(4/c) e^{−ct} 𝒮_r^{α̃(t)} ‖∇f‖₂^{2(1−α̃(t))}` with α̃ from [`improved_alpha`].
pub fn rhs_improved(s: f64, grad_l2: f64, t: f64, r: f64, c: f64) -> Result<f64> {
    let a = improved_alpha(t, r, c)?;
    Ok(4.0 / c * (-c * t).exp() * pow0(s, a) * pow0(grad_l2, 2.0 - 2.0 * a))
}

/// `(C/λ) (Σ‖D_s f‖₁²)^{α} (Σ‖D_s f‖₂²)^{1−α}` with `α = (1 − e^{−ρt})/2`.
pub fn rhs_cayley_mixed(s1: f64, s2: f64, t: f64, rho: f64, lambda: f64, constant: f64) -> Result<f64> {
    check_t(t)?;
    check_positive("ρ", rho)?;
    check_positive("λ", lambda)?;
    check_positive("C", constant)?;
    let a = (1.0 - (-rho * t).exp()) / 2.0;
    Ok(constant / lambda * pow0(s1, a) * pow0(s2, 1.0 - a))
}

/// The inequalities [`verify`] can check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundId {
    /// `VAR(f,η) ≤ c₁ (Σ I_i²)^{c₂η}` on the uniform cube.
    CubeFreeConstants,
    /// `VAR(f,η) ≤ C₁ (Σ‖∂_i f‖₁²)^{C₂η²}` in Gauss space.
    GaussFreeConstants,
    /// [`rhs_cube_l1`].
    CubeL1,
    /// [`rhs_cube_noise`].
    CubeNoise,
    /// [`rhs_gauss_l1`].
    GaussL1,
    /// [`rhs_gauss_sets`].
    GaussSets,
    /// [`rhs_log_concave`], checked on the Gaussian instance.
    LogConcave,
    /// [`rhs_biased`].
    BiasedW,
    /// [`rhs_uniform_noise`].
    UniformWNoise,
    /// [`rhs_product_lr`] on the biased cube.
    ProductLr,
    /// [`rhs_sphere`]; evaluator only, there is no sphere model.
    Sphere,
    /// [`rhs_symmetric`].
    SymmetricGroup,
    /// [`rhs_cayley`].
    Cayley,
    /// [`rhs_improved`], checked on the Gaussian instance.
    GradientImproved,
    /// [`rhs_cayley_mixed`].
    CayleyMixed,
}

impl BoundId {
    pub const ALL: [BoundId; 15] = [
        BoundId::CubeFreeConstants,
        BoundId::GaussFreeConstants,
        BoundId::CubeL1,
        BoundId::CubeNoise,
        BoundId::GaussL1,
        BoundId::GaussSets,
        BoundId::LogConcave,
        BoundId::BiasedW,
        BoundId::UniformWNoise,
        BoundId::ProductLr,
        BoundId::Sphere,
        BoundId::SymmetricGroup,
        BoundId::Cayley,
        BoundId::GradientImproved,
        BoundId::CayleyMixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundId::CubeFreeConstants => "cube-free-constants",
            BoundId::GaussFreeConstants => "gauss-free-constants",
            BoundId::CubeL1 => "cube-l1",
            BoundId::CubeNoise => "cube-noise",
            BoundId::GaussL1 => "gauss-l1",
            BoundId::GaussSets => "gauss-sets",
            BoundId::LogConcave => "log-concave",
            BoundId::BiasedW => "biased-w",
            BoundId::UniformWNoise => "uniform-w-noise",
            BoundId::ProductLr => "product-lr",
            BoundId::Sphere => "sphere",
            BoundId::SymmetricGroup => "symmetric-group",
            BoundId::Cayley => "cayley",
            BoundId::GradientImproved => "gradient-improved",
            BoundId::CayleyMixed => "cayley-mixed",
        }
    }

    /// Whether the leading constant is fixed, so `ratio ≤ 1` is asserted.
    pub fn is_pinned(self) -> bool {
        matches!(self, BoundId::CubeL1 | BoundId::GaussL1 | BoundId::LogConcave | BoundId::BiasedW | BoundId::ProductLr)
    }

    /// Whether the left-hand side is the noise covariance `Cov(f, P_t f)`
    /// rather than `Var(P_t f)`.
    pub fn is_noise_form(self) -> bool {
        matches!(
            self,
            BoundId::CubeFreeConstants
                | BoundId::GaussFreeConstants
                | BoundId::CubeNoise
                | BoundId::GaussSets
                | BoundId::UniformWNoise
        )
    }

    /// Whether instances carry the time-form right-hand side as a second column.
    pub fn has_theorem_form(self) -> bool {
        self.is_noise_form()
    }

    pub fn default_constant(self) -> f64 {
        match self {
            BoundId::GaussL1 | BoundId::GaussSets => 4.0,
            BoundId::GradientImproved | BoundId::LogConcave => 4.0,
            _ => 7.0,
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundId::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| invalid(format!("unknown bound `{s}`")))
    }
}

/// Whether grid values are times `t` or noise rates `η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    #[default]
    Time,
    /// `e^{−t} = 1 − η` on discrete models, `e^{−t} = √(1 − η²)` in Gauss space.
    Noise,
}

/// A bound together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub bound: BoundId,
    pub r: f64,
    /// Log-Sobolev constant; defaults to the model's own.
    pub rho: Option<f64>,
    /// Spectral gap; defaults to the model's own.
    pub lambda: Option<f64>,
    /// Curvature of the log-concave measure.
    pub c: f64,
    /// Leading constant where it is free (`C`, `c₁`, `C₁`).
    pub constant: Option<f64>,
    /// Exponent constant `c₂`/`C₂` of the free-constant forms.
    pub exponent: f64,
    pub clock: Clock,
}

impl BoundSpec {
    pub fn new(bound: BoundId) -> Self {
        Self { bound, r: 1.0, rho: None, lambda: None, c: 1.0, constant: None, exponent: 0.25, clock: Clock::Time }
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = Some(constant);
        self
    }

    pub fn with_exponent(mut self, exponent: f64) -> Self {
        self.exponent = exponent;
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn leading_constant(&self) -> f64 {
        self.constant.unwrap_or_else(|| self.bound.default_constant())
    }

    pub fn validate(&self) -> Result<()> {
        check_r(self.r)?;
        check_positive("c", self.c)?;
        check_positive("exponent constant", self.exponent)?;
        if let Some(rho) = self.rho {
            check_positive("ρ", rho)?;
        }
        if let Some(lambda) = self.lambda {
            check_positive("λ", lambda)?;
        }
        if let Some(c) = self.constant {
            check_positive("C", c)?;
        }
        let fixed = matches!(self.bound, BoundId::CubeL1 | BoundId::CubeNoise | BoundId::GaussL1 | BoundId::GaussSets);
        if fixed && self.r != 1.0 {
            return Err(invalid(format!("{} is an L¹ bound; r must be 1", self.bound)));
        }
        if self.bound.is_pinned() && self.constant.is_some_and(|c| c != self.bound.default_constant()) {
            return Err(invalid(format!("{} has a fixed leading constant", self.bound)));
        }
        Ok(())
    }
}

/// `DEFAULT_GRID_POINTS` log-spaced times in `DEFAULT_GRID_RANGE`.
pub fn default_time_grid() -> Vec<f64> {
    log_grid(DEFAULT_GRID_RANGE.0, DEFAULT_GRID_RANGE.1, DEFAULT_GRID_POINTS)
}

/// The default time grid mapped to noise rates by `η = 1 − e^{−t}`.
pub fn default_noise_grid() -> Vec<f64> {
    default_time_grid().into_iter().map(|t| 1.0 - (-t).exp()).collect()
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()).collect()
}

/// A Cayley model with its semigroup and constants.
#[derive(Debug)]
pub struct CayleySetting {
    pub model: CayleyModel,
    pub evolution: SemigroupEvolution,
    pub spectral_gap: f64,
    pub log_sobolev: f64,
}

impl CayleySetting {
    /// Computes the gap exactly and the log-Sobolev constant variationally.
    pub fn new(model: CayleyModel, seed: u64) -> Result<Self> {
        let evolution = SemigroupEvolution::new(Arc::new(model.generator()?))?;
        let spectral_gap = evolution.spectral_gap()?;
        let log_sobolev = log_sobolev_constant(&evolution, 12, 1e-10, seed)?;
        Ok(Self { model, evolution, spectral_gap, log_sobolev })
    }

    pub fn with_log_sobolev(model: CayleyModel, log_sobolev: f64) -> Result<Self> {
        check_positive("ρ", log_sobolev)?;
        let evolution = SemigroupEvolution::new(Arc::new(model.generator()?))?;
        let spectral_gap = evolution.spectral_gap()?;
        Ok(Self { model, evolution, spectral_gap, log_sobolev })
    }
}

/// A function on one of the supported models.
#[derive(Debug, Clone)]
pub enum Subject {
    Cube(CubeFunction),
    Hermite(HermiteExpansion),
    /// Indicator of a product of half-lines.
    Box(HalfspaceBox),
    Cayley { setting: Arc<CayleySetting>, function: TableFunction },
}

#[derive(Debug, Clone)]
pub struct Member {
    pub id: String,
    pub subject: Subject,
}

impl Member {
    pub fn new(id: impl Into<String>, subject: Subject) -> Self {
        Self { id: id.into(), subject }
    }
}

/// One `(f, t)` evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub function_id: String,
    pub t: f64,
    pub eta: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, present only when `rhs > 0`.
    pub ratio: Option<f64>,
    /// The influence sum exceeds `‖f‖₂²`, where the bound has no content.
    pub vacuous: bool,
    /// Leading constant that would make this instance an equality.
    pub empirical_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem_rhs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub instances: usize,
    pub vacuous: usize,
    /// Largest ratio over non-vacuous instances.
    pub max_ratio: Option<f64>,
    pub argmax: Option<usize>,
    /// Smallest leading constant for which every counted instance holds.
    pub min_empirical_constant: Option<f64>,
    /// Non-vacuous instances with `ratio > 1 + slack`.
    pub violations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem_max_ratio: Option<f64>,
    pub theorem_violations: usize,
    pub pinned: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub spec: BoundSpec,
    pub slack: f64,
    pub instances: Vec<Instance>,
    pub summary: Summary,
}

const CSV_HEADER: &str = "function_id,t,eta,lhs,rhs,ratio,vacuous,empirical_constant,theorem_rhs,theorem_ratio";

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl BoundReport {
    /// One row per instance, empty cells for absent values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for i in &self.instances {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                csv_field(&i.function_id),
                i.t,
                i.eta,
                i.lhs,
                i.rhs,
                csv_opt(i.ratio),
                i.vacuous,
                csv_opt(i.empirical_constant),
                csv_opt(i.theorem_rhs),
                csv_opt(i.theorem_ratio),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Discrete,
    Gaussian,
}

/// `(t, η)` for a grid value under `clock`.
fn clock_point(family: Family, clock: Clock, v: f64) -> Result<(f64, f64)> {
    match clock {
        Clock::Time => {
            check_t(v)?;
            let eta = match family {
                Family::Discrete => 1.0 - (-v).exp(),
                Family::Gaussian => (1.0 - (-2.0 * v).exp()).sqrt(),
            };
            Ok((v, eta))
        }
        Clock::Noise => {
            check_eta(v)?;
            let t = match family {
                Family::Discrete => -(1.0 - v).ln(),
                Family::Gaussian => -0.5 * (1.0 - v * v).ln(),
            };
            Ok((t, v))
        }
    }
}

/// Exact left-hand side ingredients.
trait Decay {
    /// `Cov(f, P_t f)`; `Var(P_t f)` is the value at `2t`.
    fn covariance(&self, t: f64) -> Result<f64>;
}

/// `Σ_{k≥1} e^{−kt} w_k` over level weights.
struct Levels(Vec<f64>);

impl Decay for Levels {
    fn covariance(&self, t: f64) -> Result<f64> {
        let e = (-t).exp();
        Ok(self.0.iter().enumerate().skip(1).map(|(k, w)| e.powi(k as i32) * w).sum())
    }
}

fn hermite_levels(f: &HermiteExpansion) -> Levels {
    let mut levels = vec![0.0; f.degree() + 1];
    for (a, c) in f.basis().indices().iter().zip(f.coefficients()) {
        levels[a.iter().map(|&k| k as usize).sum::<usize>()] += c * c;
    }
    Levels(levels)
}

struct BoxDecay<'a>(&'a HalfspaceBox, f64);

impl Decay for BoxDecay<'_> {
    fn covariance(&self, t: f64) -> Result<f64> {
        let measure = self.1;
        if t == 0.0 {
            return Ok(measure * (1.0 - measure));
        }
        // correlation e^{−t} = √(1 − η²)
        let eta = (1.0 - (-2.0 * t).exp()).sqrt();
        if eta >= 1.0 {
            return Ok(0.0);
        }
        gaussian_noise_stability_box(self.0, eta)
    }
}

struct CayleyDecay<'a>(&'a SemigroupEvolution, &'a TableFunction);

impl Decay for CayleyDecay<'_> {
    fn covariance(&self, t: f64) -> Result<f64> {
        let evolved = self.0.apply(t, self.1)?;
        let m = self.1.mean();
        Ok(self.1.inner(&evolved)? - m * m)
    }
}

/// Per-function quantities independent of `t`.
struct Prepared<'a> {
    family: Family,
    decay: Box<dyn Decay + Send + Sync + 'a>,
    l2: f64,
    /// The influence sum in the printed right-hand side.
    sum: f64,
    /// `Σ‖D_s f‖₂²` or `‖∇f‖₂²` where a bound uses a second sum.
    second: f64,
    /// Threshold above which `sum` makes the bound vacuous.
    vacuity: f64,
    /// Model-supplied `(ρ, λ, n)`.
    rho: f64,
    lambda: f64,
    size: usize,
}

fn mismatch(bound: BoundId, what: &str) -> Error {
    Error::ModelMismatch(format!("{bound} does not apply to {what}"))
}

fn hermite_norms(f: &HermiteExpansion, r: f64) -> Result<Vec<f64>> {
    (0..f.n())
        .map(|i| {
            let d = f.partial_derivative(i)?;
            if d.coefficients().iter().all(|&c| c == 0.0) {
                return Ok(0.0);
            }
            if r == 2.0 {
                return Ok(d.l2_norm());
            }
            d.lr_norm_converged(r, default_quad_order(&d), NORM_TOL)
        })
        .collect()
}

fn prepare<'a>(spec: &BoundSpec, subject: &'a Subject) -> Result<Prepared<'a>> {
    use BoundId as B;
    let b = spec.bound;
    let r = spec.r;
    match subject {
        Subject::Cube(f) => {
            let levels = Levels(fourier_transform(f).level_weights());
            let l2 = f.l2_norm();
            let l1_sum = s_r(&f.influences(1.0)?);
            let (sum, rho) = match b {
                B::CubeFreeConstants | B::CubeL1 | B::CubeNoise => {
                    if !f.is_uniform() {
                        return Err(mismatch(b, "a biased cube"));
                    }
                    (l1_sum, 1.0)
                }
                B::UniformWNoise => {
                    if !f.is_uniform() {
                        return Err(mismatch(b, "a biased cube"));
                    }
                    (0.25 * l1_sum, 1.0)
                }
                B::BiasedW => (f.p() * (1.0 - f.p()) * l1_sum, two_point_log_sobolev(f.p())),
                B::ProductLr => {
                    let norms = (0..f.n()).map(|i| f.local_projection(i)?.lp_norm(r)).collect::<Result<Vec<_>>>()?;
                    (s_r(&norms), two_point_log_sobolev(f.p()))
                }
                _ => return Err(mismatch(b, "cube functions")),
            };
            Ok(Prepared {
                family: Family::Discrete,
                decay: Box::new(levels),
                l2,
                sum,
                second: 0.0,
                vacuity: l2 * l2,
                rho: spec.rho.unwrap_or(rho),
                lambda: spec.lambda.unwrap_or(1.0),
                size: f.n(),
            })
        }
        Subject::Hermite(f) => {
            let l2 = f.l2_norm();
            let energy = f.dirichlet_energy();
            let (sum, vacuity) = match b {
                B::GaussFreeConstants | B::GaussL1 => (s_r(&hermite_norms(f, 1.0)?), l2 * l2),
                B::LogConcave => (s_r(&hermite_norms(f, r)?), l2 * l2),
                B::GradientImproved => (s_r(&hermite_norms(f, r)?), energy),
                _ => return Err(mismatch(b, "Hermite expansions")),
            };
            Ok(Prepared {
                family: Family::Gaussian,
                decay: Box::new(hermite_levels(f)),
                l2,
                sum,
                second: energy,
                vacuity,
                rho: spec.rho.unwrap_or(1.0),
                lambda: spec.lambda.unwrap_or(1.0),
                size: f.n(),
            })
        }
        Subject::Box(set) => {
            if set.measure() != LineMeasure::Gaussian {
                return Err(mismatch(b, "non-Gaussian product sets"));
            }
            if !matches!(b, B::GaussFreeConstants | B::GaussL1 | B::GaussSets | B::LogConcave) || r != 1.0 {
                return Err(mismatch(b, "Gaussian sets"));
            }
            let measure = set.volume()?;
            let infl = (0..set.n()).map(|i| geometric_influence_halfspace(set, i)).collect::<Result<Vec<_>>>()?;
            Ok(Prepared {
                family: Family::Gaussian,
                decay: Box::new(BoxDecay(set, measure)),
                l2: measure.sqrt(),
                sum: s_r(&infl),
                second: 0.0,
                vacuity: measure,
                rho: spec.rho.unwrap_or(1.0),
                lambda: spec.lambda.unwrap_or(1.0),
                size: set.n(),
            })
        }
        Subject::Cayley { setting, function } => {
            let model = &setting.model;
            let n = match (b, model.kind()) {
                (B::SymmetricGroup, GroupKind::Symmetric { n }) => n,
                (B::Cayley | B::CayleyMixed, GroupKind::Symmetric { n } | GroupKind::Torus { n, .. }) => n,
                _ => return Err(mismatch(b, "Cayley models")),
            };
            let norms = |r: f64| {
                (0..model.generator_count()).map(|s| model.derivative_norm(function, s, r)).collect::<Result<Vec<_>>>()
            };
            let (sum, second) = if b == B::CayleyMixed { (s_r(&norms(1.0)?), s_r(&norms(2.0)?)) } else { (s_r(&norms(r)?), 0.0) };
            let l2 = function.lp_norm(2.0)?;
            Ok(Prepared {
                family: Family::Discrete,
                decay: Box::new(CayleyDecay(&setting.evolution, function)),
                l2,
                sum,
                second,
                vacuity: l2 * l2,
                rho: spec.rho.unwrap_or(setting.log_sobolev),
                lambda: spec.lambda.unwrap_or(setting.spectral_gap),
                size: n,
            })
        }
    }
}

/// `(rhs, theorem_rhs)` at `(t, η)`.
fn evaluate_rhs(spec: &BoundSpec, p: &Prepared, t: f64, eta: f64) -> Result<(f64, Option<f64>)> {
    use BoundId as B;
    let c = spec.leading_constant();
    let r = spec.r;
    // noise forms are derived from the time bound at half the clock time
    let half = t / 2.0;
    Ok(match spec.bound {
        B::CubeFreeConstants => {
            (rhs_cube_free(p.sum, eta, c, spec.exponent)?, Some(rhs_cube_l1(p.sum, p.l2, half)?))
        }
        B::CubeNoise => (rhs_cube_noise(p.sum, p.l2, eta)?, Some(rhs_cube_l1(p.sum, p.l2, half)?)),
        B::GaussFreeConstants => {
            (rhs_gauss_free(p.sum, eta, c, spec.exponent)?, Some(rhs_gauss_l1(p.sum, p.l2, half)?))
        }
        B::GaussSets => {
            let m = p.l2 * p.l2;
            (rhs_gauss_sets(p.sum, m, eta)?, Some(rhs_gauss_sets_theorem(p.sum, m, eta)?))
        }
        B::UniformWNoise => (rhs_uniform_noise(p.sum, p.l2, eta)?, Some(rhs_biased(p.sum, p.l2, half, 1.0)?)),
        B::CubeL1 => (rhs_cube_l1(p.sum, p.l2, t)?, None),
        B::GaussL1 => (rhs_gauss_l1(p.sum, p.l2, t)?, None),
        B::LogConcave => (rhs_log_concave(p.sum, p.l2, t, r, p.rho, spec.c)?, None),
        B::BiasedW => (rhs_biased(p.sum, p.l2, t, p.rho)?, None),
        B::ProductLr => (rhs_product_lr(p.sum, p.l2, t, r, p.rho)?, None),
        B::Sphere => return Err(Error::ModelMismatch("no sphere model is available".into())),
        B::SymmetricGroup => (rhs_symmetric(p.sum, p.l2, t, r, p.rho, p.size, c)?, None),
        B::Cayley => (rhs_cayley(p.sum, p.l2, t, r, p.rho, p.lambda, c)?, None),
        B::GradientImproved => (rhs_improved(p.sum, p.second.sqrt(), t, r, spec.c)?, None),
        B::CayleyMixed => (rhs_cayley_mixed(p.sum, p.second, t, p.rho, p.lambda, c)?, None),
    })
}

/// Leading constant of the evaluated right-hand side, used to rescale
/// ratios into empirical constants.
fn scale_constant(spec: &BoundSpec) -> f64 {
    match spec.bound {
        BoundId::LogConcave => 4f64.max(4.0 / spec.c),
        BoundId::GradientImproved => 4.0 / spec.c,
        _ => spec.leading_constant(),
    }
}

fn member_instances(spec: &BoundSpec, member: &Member, grid: &[f64]) -> Result<Vec<Instance>> {
    let prepared = prepare(spec, &member.subject)?;
    let scale = scale_constant(spec);
    grid.iter()
        .map(|&v| {
            let (t, eta) = clock_point(prepared.family, spec.clock, v)?;
            let lhs = if spec.bound.is_noise_form() {
                prepared.decay.covariance(t)?
            } else {
                prepared.decay.covariance(2.0 * t)?
            };
            let lhs = lhs.max(0.0);
            let (rhs, theorem_rhs) = evaluate_rhs(spec, &prepared, t, eta)?;
            let ratio = (rhs > 0.0).then(|| lhs / rhs);
            let theorem_ratio = theorem_rhs.filter(|&x| x > 0.0).map(|x| lhs / x);
            Ok(Instance {
                function_id: member.id.clone(),
                t,
                eta,
                lhs,
                rhs,
                ratio,
                vacuous: prepared.sum > prepared.vacuity,
                empirical_constant: ratio.map(|q| q * scale),
                theorem_rhs,
                theorem_ratio,
            })
        })
        .collect()
}

/// Whether `lhs ≤ rhs` fails beyond `slack`, counting `rhs = 0 < lhs`.
fn exceeds(lhs: f64, rhs: f64, ratio: Option<f64>, slack: f64) -> bool {
    match ratio {
        Some(q) => q > 1.0 + slack,
        None => lhs > slack && rhs <= 0.0,
    }
}

/// Evaluates both sides of `spec` over `family × grid`.
///
/// Members are processed in parallel and instances are listed member by
/// member in family order, grid order within each member.
pub fn verify(spec: &BoundSpec, family: &[Member], grid: &[f64]) -> Result<BoundReport> {
    spec.validate()?;
    if spec.bound == BoundId::Sphere {
        return Err(Error::ModelMismatch("no sphere model is available".into()));
    }
    if family.is_empty() {
        return Err(invalid("the function family is empty"));
    }
    if grid.is_empty() {
        return Err(invalid("the grid is empty"));
    }
    let per_member: Vec<Vec<Instance>> =
        family.par_iter().map(|m| member_instances(spec, m, grid)).collect::<Result<_>>()?;
    let instances: Vec<Instance> = per_member.into_iter().flatten().collect();
    let gaussian = family.iter().any(|m| matches!(m.subject, Subject::Hermite(_) | Subject::Box(_)));
    let slack = if gaussian { QUADRATURE_SLACK } else { EXACT_SLACK };
    let summary = summarize(spec, &instances, slack);
    Ok(BoundReport { spec: spec.clone(), slack, instances, summary })
}

fn summarize(spec: &BoundSpec, instances: &[Instance], slack: f64) -> Summary {
    let pinned = spec.bound.is_pinned();
    let mut max_ratio: Option<(usize, f64)> = None;
    let mut min_constant: Option<f64> = None;
    let mut violations = 0;
    let mut theorem_max: Option<f64> = None;
    let mut theorem_violations = 0;
    for (k, inst) in instances.iter().enumerate() {
        // free constants hold for every function; pinned ones only where non-vacuous
        if !(pinned && inst.vacuous) {
            if let Some(c) = inst.empirical_constant {
                min_constant = Some(min_constant.map_or(c, |m: f64| m.max(c)));
            }
        }
        if inst.vacuous {
            continue;
        }
        if let Some(q) = inst.ratio {
            if max_ratio.is_none_or(|(_, m)| q > m) {
                max_ratio = Some((k, q));
            }
        }
        if exceeds(inst.lhs, inst.rhs, inst.ratio, slack) {
            violations += 1;
        }
        if let Some(th) = inst.theorem_rhs {
            if let Some(q) = inst.theorem_ratio {
                theorem_max = Some(theorem_max.map_or(q, |m: f64| m.max(q)));
            }
            if exceeds(inst.lhs, th, inst.theorem_ratio, slack) {
                theorem_violations += 1;
            }
        }
    }
    let passed = match (pinned, spec.bound.has_theorem_form()) {
        (true, _) => violations == 0,
        (false, true) => theorem_violations == 0,
        (false, false) => true,
    };
    Summary {
        instances: instances.len(),
        vacuous: instances.iter().filter(|i| i.vacuous).count(),
        max_ratio: max_ratio.map(|(_, q)| q),
        argmax: max_ratio.map(|(k, _)| k),
        min_empirical_constant: min_constant,
        violations,
        theorem_max_ratio: theorem_max,
        theorem_violations,
        pinned,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolean::builtins::{dictator, majority, parity, tribes};
    use crate::boolean::{noise_operator, noise_stability, Codomain};
    use crate::gauss::normal_pdf;
    use crate::groups::{build_symmetric_group, build_torus};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_member(id: &str, f: CubeFunction) -> Member {
        Member::new(id, Subject::Cube(f))
    }

    fn random_boolean(n: usize, p: f64, rng: &mut ChaCha8Rng) -> CubeFunction {
        let values = (0..1usize << n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        CubeFunction::new(n, p, values).unwrap()
    }

    fn random_real(n: usize, p: f64, rng: &mut ChaCha8Rng) -> CubeFunction {
        CubeFunction::new(n, p, (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn alpha_closed_forms() {
        assert_eq!(alpha(0.0, 1.3, 2.0).unwrap(), 0.0);
        for t in [0.1, 1.0, 7.0] {
            assert_relative_eq!(alpha(t, 2.0, 0.7).unwrap(), 1.0, epsilon = 1e-15);
        }
        assert_relative_eq!(alpha(60.0, 1.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(alpha(1.0, 0.5, 1.0).is_err());
        assert!(alpha(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn improved_exponent_is_the_coth_form() {
        for &(t, r, c) in &[(0.3f64, 1.0f64, 1.0f64), (1.7, 1.4, 0.5), (0.05, 1.9, 2.0)] {
            let coth = 1.0 / (c * t).tanh();
            assert_relative_eq!(improved_alpha(t, r, c).unwrap(), r / (r + (2.0 - r) * coth), epsilon = 1e-14);
        }
        assert_eq!(improved_alpha(0.0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn profile_sums() {
        assert_eq!(s_r(&[0.0, 0.0]), 0.0);
        let maj = majority(3, Codomain::PlusMinusOne).unwrap();
        // ‖D_i maj‖₁ = 2 · P(pivotal) = 2 · 1/2
        assert_relative_eq!(s_r(&maj.influences(1.0).unwrap()), 3.0, epsilon = 1e-14);
        let d = dictator(3, 0, Codomain::PlusMinusOne).unwrap();
        let local: Vec<f64> = (0..3).map(|i| d.local_projection(i).unwrap().lp_norm(1.0).unwrap()).collect();
        assert_relative_eq!(s_r(&local), 1.0, epsilon = 1e-14);
        assert_relative_eq!(w_of_f(&d), 1.0, epsilon = 1e-14);
        assert_relative_eq!(w_of_f(&maj), 0.75, epsilon = 1e-14);
        assert_eq!(w_of_f(&CubeFunction::constant(4, 0.3, 2.0).unwrap()), 0.0);
    }

    #[test]
    fn exponent_gap_is_a_square() {
        for k in 0..200 {
            let t = k as f64 * 0.05;
            let g = exponent_gap(t);
            assert!(g >= -1e-15);
            assert_relative_eq!(g, (1.0 - (-t).exp()).powi(2), epsilon = 1e-14);
        }
    }

    #[test]
    fn cube_l1_dictator_point() {
        let rhs = rhs_cube_l1(4.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(rhs, 7.0 * 4f64.powf((1.0 - (-1f64).exp()) / 2.0), epsilon = 1e-12);
        assert!((rhs - 10.849).abs() < 1e-3);
        let d = dictator(2, 0, Codomain::PlusMinusOne).unwrap();
        let lhs = noise_operator(&d, 1.0).unwrap().variance();
        assert_relative_eq!(lhs, (-2f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(rhs_cube_l1(4.0, 1.3, 0.0).unwrap(), 7.0 * 1.3 * 1.3, epsilon = 1e-13);
    }

    #[test]
    fn gauss_l1_first_hermite_point() {
        // ∂₁h₁ = 1, so the influence sum is 1 and ‖h₁‖₂ = 1
        let rhs = rhs_gauss_l1(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(rhs, 4.0 * (-1f64).exp(), epsilon = 1e-14);
        let h1 = HermiteExpansion::basis_element(&[1], 1).unwrap();
        let report = verify(&BoundSpec::new(BoundId::GaussL1), &[Member::new("h1", Subject::Hermite(h1))], &[1.0]).unwrap();
        assert_relative_eq!(report.instances[0].lhs, (-2f64).exp(), epsilon = 1e-14);
        assert!(report.instances[0].ratio.unwrap() < 1.0);
    }

    #[test]
    fn gauss_sets_limits() {
        assert_relative_eq!(rhs_gauss_sets(0.3, 0.5, 1e-9).unwrap(), 4.0, epsilon = 1e-7);
        assert_eq!(rhs_gauss_sets(0.0, 1.0, 0.5).unwrap(), 0.0);
        let full = HalfspaceBox::gaussian(vec![f64::INFINITY, f64::INFINITY]).unwrap();
        let report =
            verify(&BoundSpec::new(BoundId::GaussSets).with_clock(Clock::Noise), &[Member::new("full", Subject::Box(full))], &[0.5])
                .unwrap();
        let inst = &report.instances[0];
        assert!(inst.lhs.abs() < 1e-15);
        assert_eq!(inst.rhs, 0.0);
        assert!(inst.ratio.is_none());
        assert!(report.summary.passed);
    }

    #[test]
    fn gauss_sets_half_space() {
        let h = HalfspaceBox::gaussian(vec![0.0]).unwrap();
        let spec = BoundSpec::new(BoundId::GaussSets).with_clock(Clock::Noise);
        let report = verify(&spec, &[Member::new("half", Subject::Box(h))], &[0.5]).unwrap();
        let inst = &report.instances[0];
        let want = (0.75f64).sqrt().asin() / (2.0 * std::f64::consts::PI);
        assert_relative_eq!(inst.lhs, want, epsilon = 1e-10);
        let infl = normal_pdf(0.0);
        assert_relative_eq!(inst.rhs, rhs_gauss_sets(infl * infl, 0.5, 0.5).unwrap(), epsilon = 1e-14);
        assert!(inst.theorem_ratio.unwrap() < 1.0);
    }

    #[test]
    fn improved_bound_limits() {
        assert_relative_eq!(rhs_improved(0.7, 1.5, 0.0, 1.0, 2.0).unwrap(), 2.0 * 2.25, epsilon = 1e-14);
        let t = 0.8;
        assert_relative_eq!(rhs_improved(2.25, 1.5, t, 2.0, 1.0).unwrap(), 4.0 * (-t).exp() * 2.25, epsilon = 1e-14);
        let h1 = HermiteExpansion::basis_element(&[1], 1).unwrap();
        let report =
            verify(&BoundSpec::new(BoundId::GradientImproved), &[Member::new("h1", Subject::Hermite(h1))], &[1.0]).unwrap();
        let inst = &report.instances[0];
        let a = 1f64.tanh() / (1f64.tanh() + 1.0);
        assert_relative_eq!(inst.rhs, 4.0 * (-1f64).exp(), epsilon = 1e-12);
        assert!(a > 0.0 && inst.ratio.unwrap() < 1.0);
    }

    #[test]
    fn cayley_mixed_zero_time_and_symmetric_example() {
        assert_relative_eq!(rhs_cayley_mixed(0.4, 0.9, 0.0, 1.0, 0.5, 7.0).unwrap(), 14.0 * 0.9, epsilon = 1e-14);
        let model = build_symmetric_group(3).unwrap();
        let f = model.function(|g| if model.permutation(g).unwrap()[0] == 0 { 1.0 } else { 0.0 });
        let setting = Arc::new(CayleySetting::new(model, 3).unwrap());
        let member = Member::new("fix0", Subject::Cayley { setting, function: f });
        let report = verify(&BoundSpec::new(BoundId::CayleyMixed), &[member], &[1.0]).unwrap();
        assert!(report.instances[0].ratio.unwrap() < 1.0);
    }

    #[test]
    fn torus_mixed_reports_constant() {
        let model = build_torus(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = model.function(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        let setting = Arc::new(CayleySetting::new(model, 1).unwrap());
        let member = Member::new("rand", Subject::Cayley { setting, function: f });
        let report = verify(&BoundSpec::new(BoundId::CayleyMixed), &[member], &default_time_grid()).unwrap();
        let c = report.summary.min_empirical_constant.unwrap();
        assert!(c > 0.0 && c.is_finite());
        let worst = report.instances.iter().filter_map(|i| i.empirical_constant).fold(0.0, f64::max);
        assert_eq!(c, worst);
    }

    #[test]
    fn constants_family_passes_with_zero_lhs() {
        let family: Vec<Member> =
            [0.0, 1.0, -2.5].iter().map(|&c| cube_member("const", CubeFunction::constant(3, 0.5, c).unwrap())).collect();
        let report = verify(&BoundSpec::new(BoundId::CubeL1), &family, &default_time_grid()).unwrap();
        assert!(report.instances.iter().all(|i| i.lhs == 0.0));
        assert!(report.summary.passed);
    }

    #[test]
    fn builtins_satisfy_cube_l1() {
        let family = vec![
            cube_member("dictator", dictator(12, 0, Codomain::PlusMinusOne).unwrap()),
            cube_member("parity", parity(12, Codomain::PlusMinusOne).unwrap()),
            cube_member("majority", majority(11, Codomain::PlusMinusOne).unwrap()),
            cube_member("tribes", tribes(3, 12, Codomain::ZeroOne).unwrap()),
        ];
        let grid: Vec<f64> = (1..=30).map(|k| k as f64 * 0.1).collect();
        let report = verify(&BoundSpec::new(BoundId::CubeL1), &family, &grid).unwrap();
        assert!(report.summary.passed, "{:?}", report.summary);
        let parity3 = cube_member("parity3", parity(3, Codomain::PlusMinusOne).unwrap());
        let r3 = verify(&BoundSpec::new(BoundId::CubeL1), &[parity3], &[0.5]).unwrap();
        assert!(r3.instances[0].ratio.unwrap() < 1.0);
    }

    #[test]
    fn biased_dictator_point() {
        let d = dictator(3, 0, Codomain::PlusMinusOne).unwrap().with_bias(0.2).unwrap();
        let report = verify(&BoundSpec::new(BoundId::BiasedW), &[cube_member("d", d.clone())], &[1.0]).unwrap();
        let inst = &report.instances[0];
        assert_relative_eq!(inst.lhs, noise_operator(&d, 1.0).unwrap().variance(), epsilon = 1e-13);
        assert!(inst.ratio.unwrap() < 1.0);
    }

    #[test]
    fn product_lr_at_zero_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_real(4, 0.3, &mut rng);
        let report =
            verify(&BoundSpec::new(BoundId::ProductLr).with_r(1.5), &[cube_member("f", f.clone())], &[0.0]).unwrap();
        assert_relative_eq!(report.instances[0].rhs, 7.0 * f.l2_norm().powi(2), epsilon = 1e-13);
    }

    #[test]
    fn noise_clock_matches_time_clock() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let family: Vec<Member> = (0..8).map(|k| cube_member(&format!("r{k}"), random_boolean(5, 0.5, &mut rng))).collect();
        let times = default_time_grid();
        let etas: Vec<f64> = times.iter().map(|t| 1.0 - (-t).exp()).collect();
        let a = verify(&BoundSpec::new(BoundId::CubeL1), &family, &times).unwrap();
        let b = verify(&BoundSpec::new(BoundId::CubeL1).with_clock(Clock::Noise), &family, &etas).unwrap();
        for (x, y) in a.instances.iter().zip(&b.instances) {
            assert!((x.lhs - y.lhs).abs() <= 1e-12);
            assert!((x.rhs - y.rhs).abs() <= 1e-12 * x.rhs.max(1.0));
        }
    }

    #[test]
    fn noise_form_lhs_is_noise_stability() {
        let f = tribes(2, 6, Codomain::ZeroOne).unwrap();
        let spec = BoundSpec::new(BoundId::CubeNoise).with_clock(Clock::Noise);
        let report = verify(&spec, &[cube_member("t", f.clone())], &[0.3]).unwrap();
        assert_relative_eq!(report.instances[0].lhs, noise_stability(&f, 0.3).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn free_constant_form_is_dominated_by_time_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let family: Vec<Member> = (0..40).map(|k| cube_member(&format!("r{k}"), random_boolean(5, 0.5, &mut rng))).collect();
        let spec = BoundSpec::new(BoundId::CubeFreeConstants).with_clock(Clock::Noise);
        let report = verify(&spec, &family, &default_noise_grid()).unwrap();
        for inst in report.instances.iter().filter(|i| !i.vacuous) {
            assert!(inst.theorem_rhs.unwrap() <= inst.rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mismatched_models_are_rejected() {
        let biased = cube_member("b", dictator(3, 0, Codomain::PlusMinusOne).unwrap().with_bias(0.3).unwrap());
        assert!(matches!(verify(&BoundSpec::new(BoundId::CubeL1), &[biased], &[1.0]), Err(Error::ModelMismatch(_))));
        let h = Member::new("h", Subject::Hermite(HermiteExpansion::basis_element(&[1], 1).unwrap()));
        assert!(matches!(verify(&BoundSpec::new(BoundId::CubeL1), std::slice::from_ref(&h), &[1.0]), Err(Error::ModelMismatch(_))));
        assert!(matches!(verify(&BoundSpec::new(BoundId::Sphere), &[h], &[1.0]), Err(Error::ModelMismatch(_))));
        assert!(verify(&BoundSpec::new(BoundId::CubeL1), &[], &[1.0]).is_err());
    }

    #[test]
    fn bound_names_round_trip() {
        for b in BoundId::ALL {
            assert_eq!(b.name().parse::<BoundId>().unwrap(), b);
            let json = serde_json::to_string(&b).unwrap();
            assert_eq!(json, format!("\"{}\"", b.name()));
        }
        assert!("T9.9".parse::<BoundId>().is_err());
    }

    #[test]
    fn sphere_evaluator() {
        let v = rhs_sphere(2.0, 1.0, 0.5, 1.0, 3).unwrap();
        let a = alpha(0.5, 1.0, 2.0).unwrap();
        assert_relative_eq!(v, 7.0 * 2f64.powf(a), epsilon = 1e-14);
        assert!(rhs_sphere(2.0, 1.0, 0.5, 1.0, 1).is_err());
    }

    #[test]
    fn csv_has_one_row_per_instance() {
        let d = cube_member("a,b", dictator(3, 0, Codomain::PlusMinusOne).unwrap());
        let report = verify(&BoundSpec::new(BoundId::CubeL1), &[d], &[0.5, 1.0]).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("\"a,b\",0.5,"));
    }

    proptest! {
        #[test]
        fn lhs_is_nonincreasing_in_time(seed in 0u64..500, p in 0.1f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_real(4, p, &mut rng);
            let grid = default_time_grid();
            let report = verify(&BoundSpec::new(BoundId::ProductLr), &[cube_member("f", f)], &grid).unwrap();
            for w in report.instances.windows(2) {
                prop_assert!(w[1].lhs <= w[0].lhs + 1e-15);
            }
        }

        #[test]
        fn alpha_lies_in_unit_interval(t in 0.0f64..50.0, r in 1.0f64..=2.0, rho in 0.01f64..10.0) {
            let a = alpha(t, r, rho).unwrap();
            prop_assert!((0.0..=1.0 + 1e-15).contains(&a));
        }
    }
}
