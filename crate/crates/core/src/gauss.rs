//! Gaussian space `(ℝⁿ, μ)` through truncated Hermite expansions, half-space
//! boxes with closed-form stability, and the one-dimensional `e^{−|x|^p}`
//! measures.
//!
//! `h_k = He_k / √(k!)` are the orthonormal probabilists' Hermite
//! polynomials, `h_α(x) = Π h_{α_i}(x_i)`. The Ornstein–Uhlenbeck semigroup
//! acts by `P_t h_α = e^{−|α|t} h_α` and `∂_i h_α = √α_i h_{α−e_i}`.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::mc::{self, McEstimate};
use crate::quad::{self, gauss_hermite};

/// Largest dimension for tensor quadrature.
pub const MAX_QUAD_DIM: usize = 6;
/// Default truncation degree.
pub const DEFAULT_DEGREE: usize = 8;

const ROOT_RANGE: f64 = 12.0;
const KINK_SCAN: usize = 32;
const INNER_SHARE: f64 = 0.1;
const COUNT_SCAN: usize = 128;
const KINK_WIDTH: f64 = 1e-5;
/// Leading coordinates integrated adaptively rather than by a tensor rule.
pub const ADAPTIVE_DIMS: usize = 3;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid(format!("quantile level {u} must lie in (0, 1)")));
    }
    Ok(Normal::standard().inverse_cdf(u))
}

/// `h_0(x), …, h_d(x)`.
pub fn hermite_values(d: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(d + 1);
    out.push(1.0);
    if d >= 1 {
        out.push(x);
    }
    for k in 1..d {
        let next = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// All multi-indices of `n` coordinates with total degree at most `degree`,
/// ordered by total degree.
#[derive(Debug, PartialEq, Eq)]
pub struct MultiIndexSet {
    n: usize,
    degree: usize,
    indices: Vec<Vec<u32>>,
    positions: HashMap<Vec<u32>, usize>,
}

impl MultiIndexSet {
    pub fn new(n: usize, degree: usize) -> Self {
        let mut indices = Vec::new();
        for total in 0..=degree {
            let mut current = vec![0u32; n];
            compositions(n, total as u32, 0, &mut current, &mut indices);
        }
        let positions = indices.iter().cloned().enumerate().map(|(k, a)| (a, k)).collect();
        Self { n, degree, indices, positions }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn position(&self, alpha: &[u32]) -> Option<usize> {
        self.positions.get(alpha).copied()
    }
}

fn compositions(n: usize, remaining: u32, k: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if n == 0 {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if k == n - 1 {
        current[k] = remaining;
        out.push(current.clone());
        return;
    }
    for v in (0..=remaining).rev() {
        current[k] = v;
        compositions(n, remaining - v, k + 1, current, out);
    }
    current[k] = 0;
}

fn total(alpha: &[u32]) -> usize {
    alpha.iter().map(|&a| a as usize).sum()
}

/// Coefficients over `{h_α : |α| ≤ D}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    basis: Arc<MultiIndexSet>,
    coefficients: Vec<f64>,
}

impl HermiteExpansion {
    pub fn zero(n: usize, degree: usize) -> Self {
        let basis = Arc::new(MultiIndexSet::new(n, degree));
        let coefficients = vec![0.0; basis.len()];
        Self { basis, coefficients }
    }

    pub fn constant(n: usize, degree: usize, c: f64) -> Self {
        let mut f = Self::zero(n, degree);
        f.coefficients[0] = c;
        f
    }

    /// A single basis element `h_α`, truncated at `degree`.
    pub fn basis_element(alpha: &[u32], degree: usize) -> Result<Self> {
        Self::from_terms(alpha.len(), degree, &[(alpha.to_vec(), 1.0)])
    }

    pub fn from_terms(n: usize, degree: usize, terms: &[(Vec<u32>, f64)]) -> Result<Self> {
        let mut f = Self::zero(n, degree);
        for (alpha, c) in terms {
            if alpha.len() != n {
                return Err(invalid(format!("multi-index {alpha:?} does not have {n} entries")));
            }
            let k = f
                .basis
                .position(alpha)
                .ok_or_else(|| invalid(format!("multi-index {alpha:?} exceeds degree {degree}")))?;
            f.coefficients[k] += c;
        }
        Ok(f)
    }

    /// Projection of `g` onto degree ≤ `degree` by tensor Gauss–Hermite
    /// quadrature of order `order`.
    pub fn project(n: usize, degree: usize, order: usize, g: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        check_quad_dim(n)?;
        let rule = gauss_hermite(order);
        let mut f = Self::zero(n, degree);
        let tables: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| hermite_values(degree, x)).collect();
        let points = order.pow(n as u32);
        let basis = f.basis.clone();
        f.coefficients = (0..points)
            .into_par_iter()
            .fold(
                || vec![0.0; basis.len()],
                |mut acc, idx| {
                    let nodes = tensor_index(idx, order, n);
                    let x: Vec<f64> = nodes.iter().map(|&j| rule.nodes[j]).collect();
                    let w: f64 = nodes.iter().map(|&j| rule.weights[j]).product();
                    let gx = g(&x) * w;
                    for (c, alpha) in acc.iter_mut().zip(basis.indices()) {
                        let h: f64 = alpha.iter().zip(&nodes).map(|(&a, &j)| tables[j][a as usize]).product();
                        *c += gx * h;
                    }
                    acc
                },
            )
            .reduce(|| vec![0.0; basis.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.basis.n
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn basis(&self) -> &MultiIndexSet {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, alpha: &[u32]) -> f64 {
        self.basis.position(alpha).map_or(0.0, |k| self.coefficients[k])
    }

    pub fn mean(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn l2_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn variance(&self) -> f64 {
        self.coefficients[1..].iter().map(|c| c * c).sum()
    }

    /// `Σ_α |α| c_α² = ∫ |∇f|² dμ`.
    pub fn dirichlet_energy(&self) -> f64 {
        self.basis.indices.iter().zip(&self.coefficients).map(|(a, c)| total(a) as f64 * c * c).sum()
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a * b).sum())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::ModelMismatch("expansions have different dimension or degree".into()));
        }
        Ok(())
    }

    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let coefficients = self.coefficients.iter().zip(&other.coefficients).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { basis: self.basis.clone(), coefficients })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let tables: Vec<Vec<f64>> = x.iter().map(|&xi| hermite_values(self.degree(), xi)).collect();
        self.basis
            .indices
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, c)| **c != 0.0)
            .map(|(alpha, c)| c * alpha.iter().enumerate().map(|(i, &a)| tables[i][a as usize]).product::<f64>())
            .sum()
    }

    /// `P_t f`: multiplies `c_α` by `e^{−|α|t}`.
    pub fn ou_apply(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(invalid(format!("time {t} must be nonnegative")));
        }
        let coefficients = self
            .basis
            .indices
            .iter()
            .zip(&self.coefficients)
            .map(|(a, c)| if total(a) == 0 { *c } else { c * (-(total(a) as f64) * t).exp() })
            .collect();
        Ok(Self { basis: self.basis.clone(), coefficients })
    }

    /// `∂_i f` on the same index set (top-degree coefficients become zero).
    pub fn partial_derivative(&self, i: usize) -> Result<Self> {
        if i >= self.n() {
            return Err(invalid(format!("coordinate {i} out of range for n = {}", self.n())));
        }
        let mut out = vec![0.0; self.coefficients.len()];
        for (alpha, c) in self.basis.indices.iter().zip(&self.coefficients) {
            if alpha[i] == 0 || *c == 0.0 {
                continue;
            }
            let mut lower = alpha.clone();
            lower[i] -= 1;
            let k = self.basis.position(&lower).expect("lowered index is in the set");
            out[k] += (alpha[i] as f64).sqrt() * c;
        }
        Ok(Self { basis: self.basis.clone(), coefficients: out })
    }

    /// `Σ_{α ≠ 0} (1 − η²)^{|α|/2} c_α²`, the covariance of `f(W)` and
    /// `f(√(1−η²) W + η W′)`.
    pub fn noise_stability(&self, eta: f64) -> Result<f64> {
        let rho = correlation_for_noise(eta)?;
        Ok(self
            .basis
            .indices
            .iter()
            .zip(&self.coefficients)
            .skip(1)
            .map(|(a, c)| rho.powi(total(a) as i32) * c * c)
            .sum())
    }

    /// `‖f‖_r` by quadrature. The last coordinate is integrated exactly
    /// between the real roots of the restricted polynomial and up to two
    /// coordinates before it adaptively. For `n ≥ 4` the leading `n − 2`
    /// coordinates use a tensor Gauss–Hermite rule of order `order` instead.
    pub fn lr_norm(&self, r: f64, order: usize) -> Result<f64> {
        if !(r >= 1.0) || !r.is_finite() {
            return Err(invalid(format!("norm exponent {r} must be finite and ≥ 1")));
        }
        let n = self.n();
        if n == 0 {
            return Ok(self.coefficients[0].abs());
        }
        check_quad_dim(n)?;
        if order == 0 {
            return Err(invalid("quadrature order must be positive"));
        }
        let d = self.degree();
        let side = d + 1;
        let scale = self.coefficients.iter().map(|c| c * c).sum::<f64>().powf(0.5 * r);
        if n <= ADAPTIVE_DIMS {
            let mut tensor = vec![0.0; side.pow(n as u32)];
            for (alpha, c) in self.basis.indices.iter().zip(&self.coefficients) {
                tensor[flat_index(alpha, side)] += c;
            }
            let tol = scale * if n == 3 { 1e-6 } else { 1e-11 };
            return Ok(abs_moment_nd(&tensor, n, side, r, tol)?.powf(1.0 / r));
        }
        let rule = gauss_hermite(order);
        let tables: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| hermite_values(d, x)).collect();
        let outer = order.pow(n as u32 - 2);
        let parts: Vec<f64> = (0..outer)
            .into_par_iter()
            .map(|idx| {
                let nodes = tensor_index(idx, order, n - 2);
                let w: f64 = nodes.iter().map(|&j| rule.weights[j]).product();
                let mut grid = vec![0.0; side * side];
                for (alpha, c) in self.basis.indices.iter().zip(&self.coefficients) {
                    if *c == 0.0 {
                        continue;
                    }
                    let h: f64 = alpha[..n - 2].iter().zip(&nodes).map(|(&a, &j)| tables[j][a as usize]).product();
                    grid[flat_index(&alpha[n - 2..], side)] += c * h;
                }
                abs_moment_nd(&grid, 2, side, r, 1e-11 * scale).map(|v| w * v)
            })
            .collect::<Result<_>>()?;
        Ok(parts.iter().sum::<f64>().powf(1.0 / r))
    }

    /// [`lr_norm`](Self::lr_norm) with the order doubled until two
    /// successive values differ by less than `tol`; exact up to quadrature
    /// tolerance when `n ≤ 3`.
    pub fn lr_norm_converged(&self, r: f64, order: usize, tol: f64) -> Result<f64> {
        let mut order = order.max(self.degree() + 1);
        let mut prev = self.lr_norm(r, order)?;
        if self.n() <= ADAPTIVE_DIMS {
            return Ok(prev);
        }
        for _ in 0..4 {
            order *= 2;
            let next = self.lr_norm(r, order)?;
            if (next - prev).abs() < tol {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::Numeric(format!("L^{r} quadrature did not settle below {tol}")))
    }
}

/// Row-major position of `alpha` in a tensor with `side` entries per axis.
fn flat_index(alpha: &[u32], side: usize) -> usize {
    alpha.iter().fold(0, |acc, &a| acc * side + a as usize)
}

/// `∫ |p|^r dγ_k` for a polynomial given by its Hermite coefficient tensor
/// over `k` coordinates; the first axis is integrated adaptively.
///
/// The axis is split at [`kink_knots`] and each piece is integrated after a
/// smoothstep substitution. An inner level gets a tenth of `tol` divided by
/// the Gaussian weight it is multiplied with, so an outer level only
/// resolves its integrand above the inner noise.
fn abs_moment_nd(tensor: &[f64], k: usize, side: usize, r: f64, tol: f64) -> Result<f64> {
    if k == 1 {
        return univariate_abs_moment(tensor, r, tol);
    }
    if tensor.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    let knots = kink_knots(tensor, k, side, KINK_SCAN);
    let slice = |x: f64| {
        let weight = normal_pdf(x);
        let inner_tol = INNER_SHARE * tol / weight.max(f64::MIN_POSITIVE);
        abs_moment_nd(&restrict(tensor, side, x), k - 1, side, r, inner_tol).unwrap_or(f64::NAN) * weight
    };
    let share = tol / (knots.len() - 1) as f64;
    let mut total = 0.0;
    for pair in knots.windows(2) {
        if pair[1] > pair[0] {
            total += quad::adaptive_smoothstep(slice, pair[0], pair[1], share)?;
        }
    }
    Ok(total)
}

/// Coefficients of `f(x, ·)` for a tensor whose first axis is fixed at `x`.
fn restrict(tensor: &[f64], side: usize, x: f64) -> Vec<f64> {
    let stride = tensor.len() / side;
    let hx = hermite_values(side - 1, x);
    let mut sub = vec![0.0; stride];
    for (a, h) in hx.iter().enumerate() {
        for (s, c) in sub.iter_mut().zip(&tensor[a * stride..(a + 1) * stride]) {
            *s += h * c;
        }
    }
    sub
}

/// Breakpoints along the first axis, endpoints included, between which the
/// slice moment is smooth.
///
/// A slice moment loses smoothness where the zero set of the slice changes
/// shape. For one free coordinate that is where the number of real roots
/// changes; one level up it is where the number of those breakpoints changes.
fn kink_knots(tensor: &[f64], k: usize, side: usize, scan: usize) -> Vec<f64> {
    let count = |x: f64| {
        let sub = restrict(tensor, side, x);
        if k == 2 {
            real_roots(&sub, -ROOT_RANGE, ROOT_RANGE).len()
        } else {
            kink_knots(&sub, k - 1, side, COUNT_SCAN).len()
        }
    };
    let mut knots = vec![-ROOT_RANGE];
    let step = 2.0 * ROOT_RANGE / scan as f64;
    let mut left = count(-ROOT_RANGE);
    for cell in 0..scan {
        let a = -ROOT_RANGE + cell as f64 * step;
        let b = if cell + 1 == scan { ROOT_RANGE } else { a + step };
        let right = count(b);
        locate_count_changes(&count, a, b, left, right, &mut knots);
        left = right;
    }
    knots.push(ROOT_RANGE);
    knots.dedup();
    knots
}

fn locate_count_changes(count: &impl Fn(f64) -> usize, a: f64, b: f64, ca: usize, cb: usize, out: &mut Vec<f64>) {
    if ca == cb {
        return;
    }
    let mid = 0.5 * (a + b);
    if b - a <= KINK_WIDTH {
        out.push(mid);
        return;
    }
    let cm = count(mid);
    locate_count_changes(count, a, mid, ca, cm, out);
    locate_count_changes(count, mid, b, cm, cb, out);
}

/// `E|f|` with the doubling convergence check at `1e-6`.
pub fn l1_norm_gauss(f: &HermiteExpansion, quad_order: usize) -> Result<f64> {
    f.lr_norm_converged(1.0, quad_order, 1e-6)
}

/// Default order `2D + 1`.
pub fn default_quad_order(f: &HermiteExpansion) -> usize {
    2 * f.degree() + 1
}

fn check_quad_dim(n: usize) -> Result<()> {
    if n > MAX_QUAD_DIM {
        return Err(Error::SizeLimit(format!("tensor quadrature limited to n ≤ {MAX_QUAD_DIM}")));
    }
    Ok(())
}

fn tensor_index(mut idx: usize, order: usize, dims: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(dims);
    for _ in 0..dims {
        out.push(idx % order);
        idx /= order;
    }
    out
}

fn hermite_series(coeffs: &[f64], x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum = coeffs[0];
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        let next = (x * cur - ((k - 1) as f64).sqrt() * prev) / (k as f64).sqrt();
        prev = cur;
        cur = next;
        sum += c * cur;
    }
    sum
}

/// `∫ |Σ_k c_k h_k(y)|^r dμ(y)`.
fn univariate_abs_moment(coeffs: &[f64], r: f64, tol: f64) -> Result<f64> {
    let top = coeffs.iter().rposition(|c| *c != 0.0);
    let Some(top) = top else { return Ok(0.0) };
    let coeffs = &coeffs[..=top];
    if r == 2.0 {
        return Ok(coeffs.iter().map(|c| c * c).sum());
    }
    let p = |x: f64| hermite_series(coeffs, x);
    let mut breaks = vec![f64::NEG_INFINITY];
    breaks.extend(real_roots(coeffs, -ROOT_RANGE, ROOT_RANGE));
    breaks.push(f64::INFINITY);
    let share = tol / (breaks.len() - 1) as f64;
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        if r == 1.0 {
            // ∫_a^b h_k φ = −[h_{k−1} φ]_a^b / √k for k ≥ 1
            let mut piece = coeffs[0] * (normal_cdf(b) - normal_cdf(a));
            let hb = if b.is_finite() { hermite_values(top, b) } else { vec![0.0; top + 1] };
            let ha = if a.is_finite() { hermite_values(top, a) } else { vec![0.0; top + 1] };
            let (fb, fa) = (finite_pdf(b), finite_pdf(a));
            for k in 1..=top {
                piece -= coeffs[k] * (hb[k - 1] * fb - ha[k - 1] * fa) / (k as f64).sqrt();
            }
            total += piece.abs();
        } else {
            let lo = a.max(-ROOT_RANGE - 2.0);
            let hi = b.min(ROOT_RANGE + 2.0);
            if hi > lo {
                total += quad::adaptive(|x| p(x).abs().powf(r) * normal_pdf(x), lo, hi, share)?;
            }
        }
    }
    Ok(total)
}

fn finite_pdf(x: f64) -> f64 {
    if x.is_finite() {
        normal_pdf(x)
    } else {
        0.0
    }
}

/// Real roots of a Hermite series in `[lo, hi]`, in increasing order.
///
/// Critical points come from the derivative series, so every monotone piece
/// holds at most one root and no pair of close roots can be missed.
fn real_roots(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let Some(top) = coeffs.iter().rposition(|c| *c != 0.0) else {
        return Vec::new();
    };
    if top == 0 {
        return Vec::new();
    }
    if top <= 2 {
        return low_degree_roots(coeffs, top, lo, hi);
    }
    let derivative: Vec<f64> = (1..=top).map(|k| (k as f64).sqrt() * coeffs[k]).collect();
    let mut knots = vec![lo];
    knots.extend(real_roots(&derivative, lo, hi));
    knots.push(hi);
    let coeffs = &coeffs[..=top];
    let p = |x: f64| hermite_series(coeffs, x);
    let mut roots: Vec<f64> = Vec::new();
    for pair in knots.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (pa, pb) = (p(a), p(b));
        let root = if pa == 0.0 {
            Some(a)
        } else if pa * pb < 0.0 {
            Some(refine_root(coeffs, a, b, pa))
        } else {
            None
        };
        if let Some(x) = root {
            if roots.last().is_none_or(|last| x > *last) {
                roots.push(x);
            }
        }
    }
    if p(hi) == 0.0 && roots.last().is_none_or(|last| hi > *last) {
        roots.push(hi);
    }
    roots
}

/// Sign-changing roots of `c₀ + c₁h₁ + c₂h₂` in `[lo, hi]`.
fn low_degree_roots(coeffs: &[f64], top: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut roots = Vec::with_capacity(2);
    if top == 1 {
        roots.push(-coeffs[0] / coeffs[1]);
    } else {
        // c₂h₂ = c₂(x² − 1)/√2
        let a = coeffs[2] / std::f64::consts::SQRT_2;
        let (b, c) = (coeffs[1], coeffs[0] - a);
        let disc = b * b - 4.0 * a * c;
        if disc > 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let (x1, x2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
            roots.extend([x1.min(x2), x1.max(x2)]);
        }
    }
    roots.retain(|x| *x >= lo && *x <= hi);
    roots
}

/// `(p(x), p'(x))` for a Hermite series.
fn hermite_series_slope(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut value = coeffs[0];
    let mut slope = 0.0;
    let mut s_prev = 0.0;
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        let sk = sqrt_int(k);
        // h_k' = √k h_{k−1}
        slope += c * sk * cur;
        let next = (x * cur - s_prev * prev) / sk;
        prev = cur;
        cur = next;
        s_prev = sk;
        value += c * cur;
    }
    (value, slope)
}

fn sqrt_int(k: usize) -> f64 {
    const TABLE: [f64; 16] = [
        0.0,
        1.0,
        std::f64::consts::SQRT_2,
        1.7320508075688772,
        2.0,
        2.23606797749979,
        2.449489742783178,
        2.6457513110645907,
        2.8284271247461903,
        3.0,
        3.1622776601683795,
        3.3166247903554,
        3.4641016151377544,
        3.605551275463989,
        3.7416573867739413,
        3.872983346207417,
    ];
    TABLE.get(k).copied().unwrap_or_else(|| (k as f64).sqrt())
}

/// Newton steps kept inside a sign-change bracket, falling back to
/// bisection whenever a step leaves the bracket or fails to halve it.
fn refine_root(coeffs: &[f64], mut a: f64, mut b: f64, pa: f64) -> f64 {
    let sa = pa.signum();
    let mut x = 0.5 * (a + b);
    let mut last_width = b - a;
    for _ in 0..200 {
        let (px, dx) = hermite_series_slope(coeffs, x);
        if px == 0.0 {
            return x;
        }
        if px.signum() == sa {
            a = x;
        } else {
            b = x;
        }
        let width = b - a;
        if width <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
        let newton = x - px / dx;
        let next = if newton > a && newton < b && (newton - x).abs() < 0.5 * last_width {
            newton
        } else {
            0.5 * (a + b)
        };
        last_width = width;
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    0.5 * (a + b)
}

/// `√(1 − η²)`, the correlation of a Gaussian pair at noise `η`.
pub fn correlation_for_noise(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("noise rate η = {eta} must lie in (0, 1)")));
    }
    Ok((1.0 - eta * eta).sqrt())
}

/// Standard bivariate normal CDF `P(X ≤ a, Y ≤ b)` at correlation `ρ`, via
/// `Φ(a)Φ(b) + (1/2π) ∫_0^{arcsin ρ} exp(−(a² − 2ab sin θ + b²)/(2 cos² θ)) dθ`.
pub fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(invalid(format!("correlation {rho} must lie in [−1, 1]")));
    }
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if a == f64::INFINITY {
        return Ok(normal_cdf(b));
    }
    if b == f64::INFINITY {
        return Ok(normal_cdf(a));
    }
    let integrand = |theta: f64| {
        let s = theta.sin();
        let c2 = theta.cos().powi(2);
        if c2 <= 0.0 {
            return 0.0;
        }
        (-(a * a - 2.0 * a * b * s + b * b) / (2.0 * c2)).exp()
    };
    let tail = quad::adaptive(integrand, 0.0, rho.asin(), 1e-12)?;
    Ok(normal_cdf(a) * normal_cdf(b) + tail / (2.0 * PI))
}

/// One-dimensional coordinate law of a [`HalfspaceBox`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LineMeasure {
    Gaussian,
    /// Density `e^{−|x|^p} / Z_p`, `p ≥ 2`.
    Exponential { p: f64 },
}

impl LineMeasure {
    pub fn exponential(p: f64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(invalid(format!("exponent {p} must be finite and ≥ 2")));
        }
        Ok(LineMeasure::Exponential { p })
    }

    /// `Z_p = ∫ e^{−|x|^p} dx` by quadrature.
    pub fn normalizer(&self) -> Result<f64> {
        match *self {
            LineMeasure::Gaussian => Ok((2.0 * PI).sqrt()),
            LineMeasure::Exponential { p } => {
                let cutoff = 40f64.powf(1.0 / p);
                Ok(2.0 * quad::adaptive(|x: f64| (-x.powf(p)).exp(), 0.0, cutoff, 1e-14)?)
            }
        }
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Ok(0.0);
        }
        match *self {
            LineMeasure::Gaussian => Ok(normal_pdf(x)),
            LineMeasure::Exponential { p } => Ok((-x.abs().powf(p)).exp() / self.normalizer()?),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x == f64::INFINITY {
            return Ok(1.0);
        }
        if x == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        match *self {
            LineMeasure::Gaussian => Ok(normal_cdf(x)),
            LineMeasure::Exponential { p } => {
                let z = self.normalizer()?;
                let cutoff = 40f64.powf(1.0 / p);
                let y = x.abs();
                // integrate the smaller side to keep tails accurate
                let mass = if y < cutoff {
                    quad::adaptive(|s: f64| (-s.powf(p)).exp(), y, cutoff, 1e-16)? / z
                } else {
                    0.0
                };
                Ok(if x >= 0.0 { 1.0 - mass } else { mass })
            }
        }
    }

    /// Solves `F(x) = u` by bisection.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(invalid(format!("quantile level {u} must lie in (0, 1)")));
        }
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid)? < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * mid.abs().max(1.0) {
                return Ok(0.5 * (lo + hi));
            }
        }
        Err(Error::Numeric(format!("bisection for the {u}-quantile did not converge")))
    }
}

/// The box `Π_i (−∞, a_i]` under a product of identical line measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfspaceBox {
    thresholds: Vec<f64>,
    measure: LineMeasure,
}

impl HalfspaceBox {
    pub fn new(thresholds: Vec<f64>, measure: LineMeasure) -> Result<Self> {
        if thresholds.is_empty() || thresholds.iter().any(|a| a.is_nan()) {
            return Err(invalid("a box needs at least one non-NaN threshold"));
        }
        Ok(Self { thresholds, measure })
    }

    pub fn gaussian(thresholds: Vec<f64>) -> Result<Self> {
        Self::new(thresholds, LineMeasure::Gaussian)
    }

    pub fn n(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn measure(&self) -> LineMeasure {
        self.measure
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.thresholds).all(|(xi, a)| xi <= a)
    }

    pub fn indicator(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            1.0
        } else {
            0.0
        }
    }

    pub fn volume(&self) -> Result<f64> {
        self.thresholds.iter().map(|&a| self.measure.cdf(a)).product()
    }
}

/// `I_i^G(A) = (Π_{j≠i} F(a_j)) · density(a_i)`; zero when `a_i = ±∞`.
pub fn geometric_influence_halfspace(b: &HalfspaceBox, i: usize) -> Result<f64> {
    if i >= b.n() {
        return Err(invalid(format!("coordinate {i} out of range for n = {}", b.n())));
    }
    let ai = b.thresholds[i];
    if !ai.is_finite() {
        return Ok(0.0);
    }
    let mut value = b.measure.density(ai)?;
    for (j, &a) in b.thresholds.iter().enumerate() {
        if j != i {
            value *= b.measure.cdf(a)?;
        }
    }
    Ok(value)
}

/// `Π_i Φ₂(a_i, a_i; ρ̄) − Π_i Φ(a_i)²` with `ρ̄ = √(1 − η²)`.
pub fn gaussian_noise_stability_box(b: &HalfspaceBox, eta: f64) -> Result<f64> {
    if b.measure != LineMeasure::Gaussian {
        return Err(Error::ModelMismatch("closed-form stability needs Gaussian coordinates".into()));
    }
    let rho = correlation_for_noise(eta)?;
    let mut joint = 1.0;
    let mut single = 1.0;
    for &a in &b.thresholds {
        joint *= bivariate_normal_cdf(a, a, rho)?;
        single *= normal_cdf(a).powi(2);
    }
    Ok(joint - single)
}

/// Monte Carlo estimate of `Cov(f(W), f(√(1−η²) W + η W′))`.
pub fn gaussian_noise_stability_mc(
    f: impl Fn(&[f64]) -> f64 + Sync,
    n: usize,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let rho = correlation_for_noise(eta)?;
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let pairs = mc::sample_pairs(samples, seed, |rng| {
        let mut w = vec![0.0; n];
        let mut v = vec![0.0; n];
        for i in 0..n {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            w[i] = a;
            v[i] = rho * a + eta * b;
        }
        (f(&w), f(&v))
    });
    Ok(mc::covariance(&pairs))
}

/// The box `(−∞, a]ⁿ` of measure 1/2 and its per-coordinate influence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KmsPoint {
    pub n: usize,
    pub p: f64,
    pub threshold: f64,
    pub influence: f64,
    /// `influence · n / (log n)^{1 − 1/p}`.
    pub scaled_ratio: f64,
}

/// Threshold with `F_p(a)ⁿ = 1/2` under the density `e^{−|x|^p}/Z_p`, the
/// resulting geometric influence `2^{−(n−1)/n} F_p′(a)`, and its ratio to
/// `(log n)^{1−1/p} / n`.
pub fn kms_example(n: usize, p: f64) -> Result<KmsPoint> {
    if n < 2 {
        return Err(invalid("need n ≥ 2"));
    }
    let measure = LineMeasure::exponential(p)?;
    let level = 2f64.powf(-1.0 / n as f64);
    let threshold = measure.quantile(level)?;
    let influence = 2f64.powf(-((n - 1) as f64) / n as f64) * measure.density(threshold)?;
    let scaled_ratio = influence * n as f64 / (n as f64).ln().powf(1.0 - 1.0 / p);
    Ok(KmsPoint { n, p, threshold, influence, scaled_ratio })
}
