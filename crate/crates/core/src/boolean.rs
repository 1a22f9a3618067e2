//! The discrete cube `{-1,1}^n` under uniform and biased product measures.
//!
//! States are `n`-bit masks: bit `i` is set iff `x_i = +1`, so the flip `τ_i`
//! is `x ^ (1 << i)`. The bias `p` is the probability of `x_i = -1`, i.e.
//! `ν_p = (p δ_{-1} + q δ_{+1})^{⊗n}`; `p = 1/2` is the uniform measure.
//!
//! The semigroup `T_t` is applied through the orthonormal product basis
//! `φ_S = Π_{i∈S} φ(x_i)` of `L²(ν_p)`, on which `T_t` acts by `e^{−|S|t}`.
//! In the uniform case `φ_S = χ_S` are the Walsh characters.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::markov::{Direction, Generator, SparseOperator, MAX_DENSE_STATES};
use crate::mc::{self, McEstimate};
use crate::space::{lp_norm_weighted, FiniteProductSpace, TableFunction};

/// Largest supported dimension for dense tables.
pub const MAX_DIM: usize = 24;
/// Largest dimension for the `O(4^n)` kernel summation.
pub const MAX_KERNEL_DIM: usize = 12;

/// Values taken by a two-valued built-in function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Codomain {
    #[default]
    PlusMinusOne,
    ZeroOne,
}

impl Codomain {
    fn encode(self, truth: bool) -> f64 {
        match (self, truth) {
            (Codomain::PlusMinusOne, true) => 1.0,
            (Codomain::PlusMinusOne, false) => -1.0,
            (Codomain::ZeroOne, true) => 1.0,
            (Codomain::ZeroOne, false) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeFunction {
    n: usize,
    p: f64,
    values: Vec<f64>,
}

fn check_bias(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("bias p = {p} must lie in (0, 1)")));
    }
    Ok(())
}

impl CubeFunction {
    pub fn new(n: usize, p: f64, values: Vec<f64>) -> Result<Self> {
        check_bias(p)?;
        if n > MAX_DIM {
            return Err(Error::SizeLimit(format!("dimension {n} exceeds {MAX_DIM}")));
        }
        if values.len() != 1 << n {
            return Err(invalid(format!("expected {} values for n = {n}, got {}", 1usize << n, values.len())));
        }
        Ok(Self { n, p, values })
    }

    pub fn uniform(n: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(n, 0.5, values)
    }

    /// Table from a predicate on states, `x(i) = ±1`.
    pub fn from_fn(n: usize, p: f64, f: impl Fn(usize) -> f64) -> Result<Self> {
        if n > MAX_DIM {
            return Err(Error::SizeLimit(format!("dimension {n} exceeds {MAX_DIM}")));
        }
        Self::new(n, p, (0..1usize << n).map(f).collect())
    }

    pub fn constant(n: usize, p: f64, c: f64) -> Result<Self> {
        Self::from_fn(n, p, |_| c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_uniform(&self) -> bool {
        self.p == 0.5
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same table under another bias.
    pub fn with_bias(&self, p: f64) -> Result<Self> {
        Self::new(self.n, p, self.values.clone())
    }

    pub fn space(&self) -> Arc<FiniteProductSpace> {
        Arc::new(cube_space(self.n, self.p).expect("validated bias"))
    }

    pub fn to_table(&self) -> TableFunction {
        TableFunction::new(self.space(), self.values.clone()).expect("length matches")
    }

    pub fn weights(&self) -> Vec<f64> {
        cube_weights(self.n, self.p)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(self.weights()).map(|(v, w)| v * w).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().zip(self.weights()).map(|(v, w)| (v - m) * (v - m) * w).sum()
    }

    pub fn lp_norm(&self, r: f64) -> Result<f64> {
        lp_norm_weighted(&self.values, &self.weights(), r)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm(2.0).expect("valid exponent")
    }

    fn check_coordinate(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(invalid(format!("coordinate {i} out of range for n = {}", self.n)));
        }
        Ok(())
    }

    /// `D_i f(x) = f(τ_i x) − f(x)` (coordinates are 0-based).
    pub fn discrete_derivative(&self, i: usize) -> Result<Self> {
        self.check_coordinate(i)?;
        let bit = 1usize << i;
        let values = (0..self.values.len()).map(|x| self.values[x ^ bit] - self.values[x]).collect();
        Ok(Self { n: self.n, p: self.p, values })
    }

    /// `L_i f = E_{ν_i} f − f`, i.e. `c(x) D_i f(x)` where `c(x)` is the
    /// probability of the flipped value of `x_i`.
    pub fn local_projection(&self, i: usize) -> Result<Self> {
        self.check_coordinate(i)?;
        let bit = 1usize << i;
        let (p, q) = (self.p, 1.0 - self.p);
        let values = (0..self.values.len())
            .map(|x| {
                let c = if x & bit == 0 { q } else { p };
                c * (self.values[x ^ bit] - self.values[x])
            })
            .collect();
        Ok(Self { n: self.n, p: self.p, values })
    }

    /// `‖D_i f‖_r` under the cube's measure; `r = 1` is the influence `I_i(f)`.
    pub fn influence(&self, i: usize, r: f64) -> Result<f64> {
        self.discrete_derivative(i)?.lp_norm(r)
    }

    pub fn influences(&self, r: f64) -> Result<Vec<f64>> {
        (0..self.n).map(|i| self.influence(i, r)).collect()
    }

    /// Whether every value is 0 or 1.
    pub fn is_indicator(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// `ν{x ∈ A, τ_i x ∉ A}` for `f = 1_A`.
    pub fn set_influence(&self, i: usize) -> Result<f64> {
        self.check_coordinate(i)?;
        if !self.is_indicator() {
            return Err(Error::Domain("set influence needs a 0/1-valued function".into()));
        }
        let bit = 1usize << i;
        Ok(self
            .values
            .iter()
            .zip(self.weights())
            .enumerate()
            .filter(|&(x, (&v, _))| v == 1.0 && self.values[x ^ bit] == 0.0)
            .map(|(_, (_, w))| w)
            .sum())
    }

    /// The two distinct values of a two-valued function, in increasing order.
    pub fn two_values(&self) -> Option<(f64, f64)> {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo < hi && self.values.iter().all(|&v| v == lo || v == hi) {
            Some((lo, hi))
        } else {
            None
        }
    }

    /// Value of `x_i` (±1) at a state.
    pub fn coordinate(state: usize, i: usize) -> f64 {
        if state >> i & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

pub(crate) fn cube_weights(n: usize, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    (0..1usize << n)
        .map(|x| {
            let ones = x.count_ones() as i32;
            q.powi(ones) * p.powi(n as i32 - ones)
        })
        .collect()
}

/// `{-1,1}^n` with `ν_p`; digit 0 of each factor is `x_i = -1`.
pub fn cube_space(n: usize, p: f64) -> Result<FiniteProductSpace> {
    check_bias(p)?;
    FiniteProductSpace::product(vec![vec![p, 1.0 - p]; n])
}

/// Per-coordinate influence norms plus set influences for indicators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceProfile {
    pub r: f64,
    pub values: Vec<f64>,
    pub set_influences: Option<Vec<f64>>,
}

impl InfluenceProfile {
    pub fn of(f: &CubeFunction, r: f64) -> Result<Self> {
        let values = f.influences(r)?;
        let set_influences = if f.is_indicator() {
            Some((0..f.n()).map(|i| f.set_influence(i)).collect::<Result<_>>()?)
        } else {
            None
        };
        Ok(Self { r, values, set_influences })
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Coefficients in the orthonormal product basis of `L²(ν_p)`, indexed by
/// subset masks.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshExpansion {
    n: usize,
    p: f64,
    coefficients: Vec<f64>,
}

impl WalshExpansion {
    pub fn new(n: usize, p: f64, coefficients: Vec<f64>) -> Result<Self> {
        check_bias(p)?;
        if coefficients.len() != 1 << n {
            return Err(invalid("coefficient vector has the wrong length"));
        }
        Ok(Self { n, p, coefficients })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, subset: usize) -> f64 {
        self.coefficients[subset]
    }

    /// `Σ_{|S| = k} f̂(S)²` for `k = 0..=n`.
    pub fn level_weights(&self) -> Vec<f64> {
        let mut levels = vec![0.0; self.n + 1];
        for (s, c) in self.coefficients.iter().enumerate() {
            levels[s.count_ones() as usize] += c * c;
        }
        levels
    }

    /// Multiplies `f̂(S)` by `e^{−|S|t}`.
    pub fn damped(&self, t: f64) -> Self {
        let rho = (-t).exp();
        let powers: Vec<f64> = (0..=self.n as i32).map(|k| rho.powi(k)).collect();
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(s, c)| c * powers[s.count_ones() as usize])
            .collect();
        Self { n: self.n, p: self.p, coefficients }
    }

    /// Drops every coefficient whose subset is not inside `keep` (a mask).
    pub fn restricted(&self, keep: usize) -> Self {
        let coefficients =
            self.coefficients.iter().enumerate().map(|(s, &c)| if s & !keep == 0 { c } else { 0.0 }).collect();
        Self { n: self.n, p: self.p, coefficients }
    }

    pub fn inverse(&self) -> CubeFunction {
        let mut v = self.coefficients.clone();
        let (lo, hi) = basis_values(self.p);
        butterfly(&mut v, |c0, c1| (c0 + lo * c1, c0 + hi * c1));
        CubeFunction { n: self.n, p: self.p, values: v }
    }
}

/// `(φ(−1), φ(+1))` for the normalized centered coordinate under `ν_p`.
fn basis_values(p: f64) -> (f64, f64) {
    let q = 1.0 - p;
    (-(q / p).sqrt(), (p / q).sqrt())
}

/// In-place transform applying `op` to every (`x_i = −1`, `x_i = +1`) pair.
fn butterfly(v: &mut [f64], op: impl Fn(f64, f64) -> (f64, f64)) {
    let len = v.len();
    let mut half = 1;
    while half < len {
        for base in (0..len).step_by(2 * half) {
            for j in base..base + half {
                let (a, b) = op(v[j], v[j + half]);
                v[j] = a;
                v[j + half] = b;
            }
        }
        half *= 2;
    }
}

/// Expansion in the orthonormal basis of `L²(ν_p)` in `O(n 2^n)`.
pub fn fourier_transform(f: &CubeFunction) -> WalshExpansion {
    let p = f.p;
    let q = 1.0 - p;
    let s = (p * q).sqrt();
    let mut v = f.values.clone();
    butterfly(&mut v, |a, b| (p * a + q * b, s * (b - a)));
    WalshExpansion { n: f.n, p, coefficients: v }
}

/// Fast Walsh–Hadamard transform, `f̂(S) = E_ν[f χ_S]`; uniform measure only.
pub fn walsh_transform(f: &CubeFunction) -> Result<WalshExpansion> {
    if !f.is_uniform() {
        return Err(invalid("the Walsh transform is defined for the uniform measure"));
    }
    Ok(fourier_transform(f))
}

pub fn inverse_walsh(e: &WalshExpansion) -> CubeFunction {
    e.inverse()
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(invalid(format!("time {t} must be nonnegative")));
    }
    Ok(())
}

/// `T_t f` through the level multiplier `e^{−|S|t}` (any bias).
pub fn noise_operator(f: &CubeFunction, t: f64) -> Result<CubeFunction> {
    check_time(t)?;
    if t.is_infinite() {
        return CubeFunction::constant(f.n, f.p, f.mean());
    }
    Ok(fourier_transform(f).damped(t).inverse())
}

/// `T_t f(x) = ∫ f(ω) Π_i (1 + e^{−t} x_i ω_i) dν(ω)` by direct summation.
pub fn bonami_beckner_kernel(f: &CubeFunction, t: f64) -> Result<CubeFunction> {
    check_time(t)?;
    if !f.is_uniform() {
        return Err(invalid("the product kernel is the uniform-measure semigroup"));
    }
    if f.n > MAX_KERNEL_DIM {
        return Err(Error::SizeLimit(format!("kernel summation limited to n ≤ {MAX_KERNEL_DIM}")));
    }
    let rho = (-t).exp();
    let n = f.n;
    let size = 1usize << n;
    // kernel value depends only on the number of disagreeing coordinates
    let by_distance: Vec<f64> =
        (0..=n as i32).map(|d| (1.0 + rho).powi(n as i32 - d) * (1.0 - rho).powi(d) / size as f64).collect();
    let values = (0..size)
        .map(|x| {
            (0..size)
                .map(|w| f.values[w] * by_distance[(x ^ w).count_ones() as usize])
                .sum()
        })
        .collect();
    Ok(CubeFunction { n, p: f.p, values })
}

/// The time `t = −log(1 − η)` at which `e^{−t} = 1 − η`.
pub fn time_for_noise(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("noise rate η = {eta} must lie in (0, 1)")));
    }
    Ok(-(1.0 - eta).ln())
}

/// `VAR(f, η) = Cov(f, T_t f)` with `e^{−t} = 1 − η`, i.e.
/// `Σ_{S ≠ ∅} (1 − η)^{|S|} f̂(S)²`.
pub fn noise_stability(f: &CubeFunction, eta: f64) -> Result<f64> {
    time_for_noise(eta)?;
    let levels = fourier_transform(f).level_weights();
    Ok(levels.iter().enumerate().skip(1).map(|(k, w)| (1.0 - eta).powi(k as i32) * w).sum())
}

/// Monte Carlo estimate of `Cov(f(X), f(X^η))` where each coordinate of
/// `X^η` is independently redrawn from `ν_p` with probability `η`.
pub fn noise_stability_mc(f: &CubeFunction, eta: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    time_for_noise(eta)?;
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let n = f.n;
    let p = f.p;
    let pairs = mc::sample_pairs(samples, seed, |rng| {
        let mut x = 0usize;
        let mut y = 0usize;
        for i in 0..n {
            let xi = rng.random::<f64>() >= p;
            let yi = if rng.random::<f64>() < eta { rng.random::<f64>() >= p } else { xi };
            x |= (xi as usize) << i;
            y |= (yi as usize) << i;
        }
        (f.values[x], f.values[y])
    });
    Ok(mc::covariance(&pairs))
}

/// Closed-form log-Sobolev constant of the two-point space with bias `p`,
/// `2(p − q)/(log p − log q)`, equal to 1 at `p = 1/2`.
pub fn two_point_log_sobolev(p: f64) -> f64 {
    let q = 1.0 - p;
    if (p - q).abs() < 1e-12 {
        1.0
    } else {
        2.0 * (p - q) / (p.ln() - q.ln())
    }
}

/// Generator of `T_t` on `({-1,1}^n, ν_p)`.
///
/// `L = Σ_i L_i` with `L_i f(x) = c(x) D_i f(x)`, where `c(x)` is the
/// probability of the flipped value of `x_i`; this is `E_{μ_i} f − f`. In the
/// uniform case `L_i = D_i / 2` and `L = (1/2) Σ D_i`. The directions are the
/// `L_i`, so `ℰ(f,f) = pq Σ ‖D_i f‖₂²` (`= (1/4) Σ ‖D_i f‖₂²` when uniform).
pub fn build_cube_generator(n: usize, p: f64) -> Result<Generator> {
    check_bias(p)?;
    if n == 0 || (1usize << n) > MAX_DENSE_STATES {
        return Err(Error::SizeLimit(format!("cube generator needs 1 ≤ n and 2^n ≤ {MAX_DENSE_STATES}")));
    }
    let q = 1.0 - p;
    let space = Arc::new(cube_space(n, p)?);
    let size = 1usize << n;
    let mut matrix = nalgebra::DMatrix::zeros(size, size);
    let mut directions = Vec::with_capacity(n);
    for i in 0..n {
        let bit = 1usize << i;
        let rows: Vec<Vec<(usize, f64)>> = (0..size)
            .map(|x| {
                let c = if x & bit == 0 { q } else { p };
                vec![(x ^ bit, c), (x, -c)]
            })
            .collect();
        let op = SparseOperator::new(rows);
        matrix += op.to_dense();
        let name = if p == 0.5 { format!("D_{i}/2") } else { format!("L_{i}") };
        directions.push(Direction::new(name, op));
    }
    let name = if p == 0.5 { "cube".to_string() } else { format!("cube(p={p})") };
    Ok(Generator::new(name, space, matrix, directions, 0.0)?
        .with_spectral_gap(1.0)
        .with_log_sobolev(two_point_log_sobolev(p)))
}

/// Named built-in functions.
pub mod builtins {
    use super::*;

    /// `x_i`.
    pub fn dictator(n: usize, i: usize, codomain: Codomain) -> Result<CubeFunction> {
        if i >= n {
            return Err(invalid(format!("coordinate {i} out of range for n = {n}")));
        }
        CubeFunction::from_fn(n, 0.5, |x| codomain.encode(x >> i & 1 == 1))
    }

    /// `χ_{[n]} = Π x_i`, which is `+1` iff the number of `−1` coordinates is even.
    pub fn parity(n: usize, codomain: Codomain) -> Result<CubeFunction> {
        CubeFunction::from_fn(n, 0.5, |x| codomain.encode((n - x.count_ones() as usize).is_multiple_of(2)))
    }

    /// `sign(Σ x_i)` for odd `n`.
    pub fn majority(n: usize, codomain: Codomain) -> Result<CubeFunction> {
        if n.is_multiple_of(2) {
            return Err(invalid("majority needs an odd number of coordinates"));
        }
        CubeFunction::from_fn(n, 0.5, |x| codomain.encode(2 * x.count_ones() as usize > n))
    }

    /// OR over consecutive blocks of `width` coordinates of the AND of the block.
    pub fn tribes(width: usize, n: usize, codomain: Codomain) -> Result<CubeFunction> {
        if width == 0 || !n.is_multiple_of(width) {
            return Err(invalid(format!("tribes width {width} must divide n = {n}")));
        }
        let block = (1usize << width) - 1;
        CubeFunction::from_fn(n, 0.5, |x| codomain.encode((0..n / width).any(|b| (x >> (b * width)) & block == block)))
    }
}

/// Parses `<bitstring> <value>` lines; character `j` of the bit string is
/// coordinate `j` and `'1'` means `+1`. Blank lines and `#` comments are
/// ignored. Every state must appear exactly once.
pub fn parse_function_text(text: &str, p: f64) -> Result<CubeFunction> {
    let mut n = None;
    let mut values: Vec<Option<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: lineno + 1, message };
        let mut parts = line.split_whitespace();
        let bits = parts.next().ok_or_else(|| err("missing bit string".into()))?;
        let value: f64 = parts
            .next()
            .ok_or_else(|| err("missing value".into()))?
            .parse()
            .map_err(|e| err(format!("bad value: {e}")))?;
        if parts.next().is_some() {
            return Err(err("trailing tokens".into()));
        }
        let dim = *n.get_or_insert(bits.len());
        if bits.len() != dim {
            return Err(err(format!("bit string has length {}, expected {dim}", bits.len())));
        }
        if dim > MAX_DIM {
            return Err(Error::SizeLimit(format!("dimension {dim} exceeds {MAX_DIM}")));
        }
        if values.is_empty() {
            values = vec![None; 1 << dim];
        }
        let mut state = 0usize;
        for (j, c) in bits.chars().enumerate() {
            match c {
                '1' => state |= 1 << j,
                '0' => {}
                other => return Err(err(format!("invalid bit '{other}'"))),
            }
        }
        if values[state].replace(value).is_some() {
            return Err(err(format!("state {bits} listed twice")));
        }
    }
    let n = n.ok_or_else(|| Error::Parse { line: 0, message: "no entries".into() })?;
    let values: Option<Vec<f64>> = values.into_iter().collect();
    let values = values.ok_or_else(|| Error::Parse { line: 0, message: format!("not all {} states are listed", 1usize << n) })?;
    CubeFunction::new(n, p, values)
}

/// Inverse of [`parse_function_text`].
pub fn format_function_text(f: &CubeFunction) -> String {
    let mut out = String::new();
    for (x, v) in f.values.iter().enumerate() {
        let bits: String = (0..f.n).map(|j| if x >> j & 1 == 1 { '1' } else { '0' }).collect();
        let _ = writeln!(out, "{bits} {v:?}");
    }
    out
}
