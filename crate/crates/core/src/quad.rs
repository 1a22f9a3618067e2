//! One-dimensional quadrature rules used by the Gaussian model.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, w)| w * f(x)).sum()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n > 0, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for the standard normal density (weights sum to 1).
///
/// Nodes come from the Jacobi matrix of the normalized probabilists'
/// polynomials, are polished by Newton steps, and the weights use the
/// Christoffel formula `w = 1 / Σ_{k<n} h_k(x)^2`.
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n > 0, "rule needs at least one node");
    if n == 1 {
        return Rule { nodes: vec![0.0], weights: vec![1.0] };
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..8 {
            let (h, dh, _) = normalized_hermite_tail(n, *x);
            if dh == 0.0 {
                break;
            }
            let dx = h / dh;
            *x -= dx;
            if dx.abs() < 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, _, sum_sq) = normalized_hermite_tail(n, *x);
        weights.push(1.0 / sum_sq);
    }
    // symmetrize to remove rounding asymmetry
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Rule { nodes, weights }
}

/// Returns `(h_n(x), h_n'(x), Σ_{k<n} h_k(x)^2)` for the orthonormal
/// probabilists' Hermite polynomials.
fn normalized_hermite_tail(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    // h_n' = sqrt(n) h_{n-1}
    (cur, (n as f64).sqrt() * prev, sum_sq)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// 15-point Kronrod value on `[a, b]` with the QUADPACK error estimate.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut values = [0.0; 15];
    values[7] = f(c);
    for j in 0..7 {
        let dx = h * GK_NODES[j];
        values[j] = f(c - dx);
        values[14 - j] = f(c + dx);
    }
    let weight = |k: usize| GK_WEIGHTS[if k <= 7 { k } else { 14 - k }];
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (k, v) in values.iter().enumerate() {
        kronrod += weight(k) * v;
        let j = if k <= 7 { k } else { 14 - k };
        // odd Kronrod indices, the centre included, are the Gauss nodes
        if j % 2 == 1 {
            gauss += G_WEIGHTS[j / 2] * v;
        }
    }
    let mean = 0.5 * kronrod;
    let spread: f64 = values.iter().enumerate().map(|(k, v)| weight(k) * (v - mean).abs()).sum::<f64>() * h.abs();
    let mut err = ((kronrod - gauss) * h).abs();
    if spread > 0.0 && err > 0.0 {
        err = spread * (200.0 * err / spread).powf(1.5).min(1.0);
    }
    let magnitude: f64 = values.iter().enumerate().map(|(k, v)| weight(k) * v.abs()).sum::<f64>() * h.abs();
    err = err.max(50.0 * f64::EPSILON * magnitude);
    Panel { lo: a, hi: b, value: kronrod * h, err }
}

/// Most panels [`adaptive`] will create.
const MAX_PANELS: usize = 4000;

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`
/// to an absolute tolerance: the panel with the largest error estimate is
/// bisected until the estimates sum below `abs_tol`.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (sign, lo, hi) = if a < b { (1.0, a, b) } else { (-1.0, b, a) };
    let first = gk15(&f, lo, hi);
    let mut total_err = first.err;
    let mut heap = std::collections::BinaryHeap::from([first]);
    let mut settled = 0.0;
    let min_width = 1e-13 * (hi - lo);
    while total_err > abs_tol && heap.len() < MAX_PANELS {
        let Some(worst) = heap.pop() else { break };
        total_err -= worst.err;
        if !worst.value.is_finite() {
            return Err(Error::Numeric(format!("non-finite integrand on [{}, {}]", worst.lo, worst.hi)));
        }
        if worst.hi - worst.lo <= min_width {
            settled += worst.value;
            continue;
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        for panel in [gk15(&f, worst.lo, mid), gk15(&f, mid, worst.hi)] {
            total_err += panel.err;
            heap.push(panel);
        }
    }
    let value: f64 = settled + heap.iter().map(|p| p.value).sum::<f64>();
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite integral on [{lo}, {hi}]")));
    }
    if total_err > 1e3 * abs_tol.max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!("quadrature did not converge on [{lo}, {hi}] (error {total_err:.1e})")));
    }
    Ok(sign * value)
}

/// [`adaptive`] after the substitution `x = a + (b − a)(3u² − 2u³)`, which
/// smooths `|x − c|^{3/2}`-type behaviour at either endpoint.
pub fn adaptive_smoothstep(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    let w = b - a;
    adaptive(|u| f(a + w * u * u * (3.0 - 2.0 * u)) * 6.0 * w * u * (1.0 - u), 0.0, 1.0, abs_tol)
}
