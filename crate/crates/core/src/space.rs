//! Finite probability spaces and real-valued tables over them.
//!
//! Product spaces enumerate their states in mixed radix with factor 0 as the
//! least significant digit, so that on the cube `{-1,1}^n` the state index is
//! the usual bit mask (bit `i` set iff coordinate `i` is `+1`). Every table in
//! the crate shares this layout.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};

/// Tolerance for exactness checks on finite spaces.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProductSpace {
    weights: Vec<f64>,
    factors: Option<Vec<Vec<f64>>>,
    strides: Vec<usize>,
}

fn check_probability_vector(w: &[f64], what: &str) -> Result<()> {
    if w.is_empty() {
        return Err(invalid(format!("{what}: empty weight vector")));
    }
    if let Some(bad) = w.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(invalid(format!("{what}: weight {bad} is not strictly positive")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > EXACT_TOL * (w.len() as f64).max(1.0) {
        return Err(invalid(format!("{what}: weights sum to {total}, expected 1")));
    }
    Ok(())
}

impl FiniteProductSpace {
    /// A space without product structure.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_probability_vector(&weights, "space")?;
        Ok(Self { weights, factors: None, strides: Vec::new() })
    }

    pub fn uniform(states: usize) -> Result<Self> {
        if states == 0 {
            return Err(invalid("space must have at least one state"));
        }
        Self::new(vec![1.0 / states as f64; states])
    }

    /// Product of the given factor distributions.
    pub fn product(factors: Vec<Vec<f64>>) -> Result<Self> {
        let mut strides = Vec::with_capacity(factors.len());
        let mut size = 1usize;
        for (k, w) in factors.iter().enumerate() {
            check_probability_vector(w, &format!("factor {k}"))?;
            strides.push(size);
            size = size
                .checked_mul(w.len())
                .ok_or_else(|| Error::SizeLimit("product space too large".into()))?;
        }
        let mut weights = vec![1.0; size];
        for (k, w) in factors.iter().enumerate() {
            let stride = strides[k];
            let card = w.len();
            for (state, x) in weights.iter_mut().enumerate() {
                *x *= w[(state / stride) % card];
            }
        }
        Ok(Self { weights, factors: Some(factors), strides })
    }

    /// Uniform product of `dims` copies of a `card`-point space.
    pub fn uniform_product(card: usize, dims: usize) -> Result<Self> {
        if card == 0 {
            return Err(invalid("factor cardinality must be positive"));
        }
        Self::product(vec![vec![1.0 / card as f64; card]; dims])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, state: usize) -> f64 {
        self.weights[state]
    }

    pub fn factors(&self) -> Option<&[Vec<f64>]> {
        self.factors.as_deref()
    }

    pub fn factor_count(&self) -> usize {
        self.factors.as_ref().map_or(0, Vec::len)
    }

    /// Digit of `state` in factor `k`. Panics on spaces without factors.
    pub fn digit(&self, state: usize, k: usize) -> usize {
        let factors = self.factors.as_ref().expect("space has no factors");
        (state / self.strides[k]) % factors[k].len()
    }

    /// State obtained by replacing the digit of factor `k` with `value`.
    pub fn with_digit(&self, state: usize, k: usize, value: usize) -> usize {
        let current = self.digit(state, k);
        state - current * self.strides[k] + value * self.strides[k]
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }
}

/// A real function stored as one value per state.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFunction {
    space: Arc<FiniteProductSpace>,
    values: Vec<f64>,
}

impl TableFunction {
    pub fn new(space: Arc<FiniteProductSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(invalid(format!(
                "table has {} values but the space has {} states",
                values.len(),
                space.len()
            )));
        }
        Ok(Self { space, values })
    }

    pub fn constant(space: Arc<FiniteProductSpace>, c: f64) -> Self {
        let values = vec![c; space.len()];
        Self { space, values }
    }

    pub fn from_fn(space: Arc<FiniteProductSpace>, f: impl FnMut(usize) -> f64) -> Self {
        let values = (0..space.len()).map(f).collect();
        Self { space, values }
    }

    pub fn space(&self) -> &Arc<FiniteProductSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(Arc::clone(&self.space), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { space: Arc::clone(&self.space), values: self.values.iter().map(|&x| f(x)).collect() }
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space {
            Ok(())
        } else {
            Err(invalid("functions live on different spaces"))
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_space(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { space: Arc::clone(&self.space), values })
    }

    /// `∫ f dμ`.
    pub fn mean(&self) -> f64 {
        self.values.iter().zip(self.space.weights()).map(|(v, w)| v * w).sum()
    }

    /// `∫ f g dμ`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.same_space(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.space.weights())
            .map(|((a, b), w)| a * b * w)
            .sum())
    }

    pub fn centered(&self) -> Self {
        let m = self.mean();
        self.map(|x| x - m)
    }

    /// `L^r(μ)` norm for `r ≥ 1`; `r = f64::INFINITY` gives the max modulus.
    pub fn lp_norm(&self, r: f64) -> Result<f64> {
        lp_norm_weighted(&self.values, self.space.weights(), r)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().zip(self.space.weights()).map(|(v, w)| (v - m) * (v - m) * w).sum()
    }

    /// `∫ f log f dμ − (∫ f dμ) log(∫ f dμ)` with `0 log 0 = 0`.
    pub fn entropy(&self) -> Result<f64> {
        entropy_weighted(&self.values, self.space.weights())
    }

    /// Averages out every factor not in `keep`, leaving a function of the
    /// `keep` coordinates only.
    pub fn conditional_expectation(&self, keep: &[usize]) -> Result<Self> {
        let factors = self
            .space
            .factors()
            .ok_or_else(|| invalid("conditional expectation needs a product space"))?;
        if let Some(&bad) = keep.iter().find(|&&k| k >= factors.len()) {
            return Err(invalid(format!("factor {bad} does not exist (space has {})", factors.len())));
        }
        let mut values = self.values.clone();
        for (k, w) in factors.iter().enumerate() {
            if keep.contains(&k) {
                continue;
            }
            let stride = self.space.stride(k);
            let card = w.len();
            let block = stride * card;
            let mut out = vec![0.0; values.len()];
            for base in (0..values.len()).step_by(block) {
                for low in 0..stride {
                    let start = base + low;
                    let avg: f64 = (0..card).map(|j| w[j] * values[start + j * stride]).sum();
                    for j in 0..card {
                        out[start + j * stride] = avg;
                    }
                }
            }
            values = out;
        }
        Ok(Self { space: Arc::clone(&self.space), values })
    }
}

pub(crate) fn lp_norm_weighted(values: &[f64], weights: &[f64], r: f64) -> Result<f64> {
    if r.is_nan() || r < 1.0 {
        return Err(invalid(format!("norm exponent {r} must be at least 1")));
    }
    if r.is_infinite() {
        return Ok(values
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .fold(0.0_f64, |acc, (v, _)| acc.max(v.abs())));
    }
    let scale = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = if r == 1.0 {
        values.iter().zip(weights).map(|(v, w)| v.abs() * w).sum::<f64>() / scale
    } else if r == 2.0 {
        values.iter().zip(weights).map(|(v, w)| (v / scale).powi(2) * w).sum()
    } else {
        values.iter().zip(weights).map(|(v, w)| (v.abs() / scale).powf(r) * w).sum()
    };
    Ok(scale * sum.powf(1.0 / r))
}

pub(crate) fn entropy_weighted(values: &[f64], weights: &[f64]) -> Result<f64> {
    if let Some(bad) = values.iter().find(|&&v| v < 0.0 || v.is_nan()) {
        return Err(Error::Domain(format!("entropy of a function with negative value {bad}")));
    }
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let first: f64 = values.iter().zip(weights).map(|(&v, w)| xlogx(v) * w).sum();
    Ok((first - xlogx(mean)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cube(n: usize) -> Arc<FiniteProductSpace> {
        Arc::new(FiniteProductSpace::uniform_product(2, n).unwrap())
    }

    // x_i = +1 iff bit i is set
    fn coord(state: usize, i: usize) -> f64 {
        if state >> i & 1 == 1 { 1.0 } else { -1.0 }
    }

    #[test]
    fn weights_must_be_a_probability_vector() {
        assert!(FiniteProductSpace::new(vec![0.5, 0.6]).is_err());
        assert!(FiniteProductSpace::new(vec![1.0, 0.0]).is_err());
        assert!(FiniteProductSpace::product(vec![vec![0.2, 0.8], vec![0.5, 0.5, 0.1]]).is_err());
    }

    #[test]
    fn product_weights_factorize() {
        let s = FiniteProductSpace::product(vec![vec![0.2, 0.8], vec![0.1, 0.3, 0.6]]).unwrap();
        assert_eq!(s.len(), 6);
        for state in 0..6 {
            let w = [0.2, 0.8][s.digit(state, 0)] * [0.1, 0.3, 0.6][s.digit(state, 1)];
            assert_abs_diff_eq!(s.weight(state), w, epsilon = 1e-15);
        }
        // factor 0 is the fastest digit
        assert_eq!(s.digit(1, 0), 1);
        assert_eq!(s.digit(2, 1), 1);
        assert_eq!(s.with_digit(5, 1, 0), 1);
    }

    #[test]
    fn lp_norm_examples() {
        let c = TableFunction::constant(cube(3), -2.5);
        for r in [1.0, 1.5, 2.0, 7.0, f64::INFINITY] {
            assert_abs_diff_eq!(c.lp_norm(r).unwrap(), 2.5, epsilon = 1e-14);
        }
        let dictator = TableFunction::from_fn(cube(2), |s| coord(s, 0));
        assert_abs_diff_eq!(dictator.lp_norm(2.0).unwrap(), 1.0, epsilon = 1e-15);
        let four = TableFunction::new(Arc::new(FiniteProductSpace::uniform(4).unwrap()), vec![0.0, 1.0, 2.0, 3.0])
            .unwrap();
        assert_abs_diff_eq!(four.lp_norm(1.0).unwrap(), 1.5, epsilon = 1e-15);
        assert!(matches!(four.lp_norm(0.5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn variance_examples() {
        assert_eq!(TableFunction::constant(cube(2), 3.0).variance(), 0.0);
        let dictator = TableFunction::from_fn(cube(3), |s| coord(s, 0));
        assert_abs_diff_eq!(dictator.variance(), 1.0, epsilon = 1e-15);
        let half = TableFunction::from_fn(cube(3), |s| (s & 1) as f64);
        assert_abs_diff_eq!(half.variance(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(TableFunction::constant(cube(2), 2.0).entropy().unwrap(), 0.0, epsilon = 1e-15);
        let half = TableFunction::from_fn(cube(3), |s| (s & 1) as f64);
        assert_abs_diff_eq!(half.entropy().unwrap(), 0.5 * 2f64.ln(), epsilon = 1e-15);
        let two = TableFunction::new(Arc::new(FiniteProductSpace::uniform(2).unwrap()), vec![2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(two.entropy().unwrap(), 2f64.ln(), epsilon = 1e-15);
        let neg = TableFunction::new(Arc::new(FiniteProductSpace::uniform(2).unwrap()), vec![-1.0, 1.0]).unwrap();
        assert!(matches!(neg.entropy(), Err(Error::Domain(_))));
    }

    #[test]
    fn conditional_expectation_examples() {
        let f = TableFunction::from_fn(cube(2), |s| coord(s, 0) * coord(s, 1));
        assert_eq!(f.conditional_expectation(&[0, 1]).unwrap(), f);
        let g = f.conditional_expectation(&[0]).unwrap();
        assert!(g.values().iter().all(|v| v.abs() < 1e-15));
        let h = TableFunction::from_fn(cube(3), |s| s as f64);
        let empty = h.conditional_expectation(&[]).unwrap();
        assert!(empty.values().iter().all(|v| (v - 3.5).abs() < 1e-14));
        assert!(h.conditional_expectation(&[3]).is_err());
        let flat = TableFunction::constant(Arc::new(FiniteProductSpace::uniform(3).unwrap()), 1.0);
        assert!(flat.conditional_expectation(&[]).is_err());
    }

    #[test]
    fn conditional_expectation_biased_depends_on_kept_factor_only() {
        let s = Arc::new(FiniteProductSpace::product(vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.3]]).unwrap());
        let f = TableFunction::from_fn(Arc::clone(&s), |x| (x * x) as f64);
        let g = f.conditional_expectation(&[1]).unwrap();
        for x in 0..6 {
            let expect: f64 = (0..2).map(|d| [0.3, 0.7][d] * f.values()[s.with_digit(x, 0, d)]).sum();
            assert_abs_diff_eq!(g.values()[x], expect, epsilon = 1e-14);
            assert_abs_diff_eq!(g.values()[x], g.values()[s.with_digit(x, 0, 0)], epsilon = 0.0);
        }
    }

    fn space_and_values() -> impl Strategy<Value = (Arc<FiniteProductSpace>, Vec<f64>)> {
        (1usize..4, 2usize..4).prop_flat_map(|(dims, card)| {
            let n = card.pow(dims as u32);
            (
                prop::collection::vec(prop::collection::vec(0.05f64..1.0, card), dims),
                prop::collection::vec(-3.0f64..3.0, n),
            )
                .prop_map(move |(raw, values)| {
                    let factors = raw
                        .into_iter()
                        .map(|w| {
                            let t: f64 = w.iter().sum();
                            w.into_iter().map(|x| x / t).collect()
                        })
                        .collect();
                    (Arc::new(FiniteProductSpace::product(factors).unwrap()), values)
                })
        })
    }

    proptest! {
        #[test]
        fn norms_are_monotone_in_the_exponent((space, values) in space_and_values()) {
            let f = TableFunction::new(space, values).unwrap();
            let norms: Vec<f64> = [1.0, 1.5, 2.0, 4.0, f64::INFINITY]
                .iter()
                .map(|&r| f.lp_norm(r).unwrap())
                .collect();
            for w in norms.windows(2) {
                prop_assert!(w[0] <= w[1] * (1.0 + 1e-12) + 1e-15);
            }
        }

        #[test]
        fn variance_is_centered_second_moment((space, values) in space_and_values()) {
            let f = TableFunction::new(space, values).unwrap();
            let l2 = f.centered().lp_norm(2.0).unwrap();
            prop_assert!((f.variance() - l2 * l2).abs() <= 1e-12);
        }

        #[test]
        fn conditional_expectation_is_a_mean_preserving_projection(
            (space, values) in space_and_values(),
            mask in 0u32..8,
        ) {
            let f = TableFunction::new(space, values).unwrap();
            let keep: Vec<usize> = (0..f.space().factor_count()).filter(|k| mask >> k & 1 == 1).collect();
            let once = f.conditional_expectation(&keep).unwrap();
            let twice = once.conditional_expectation(&keep).unwrap();
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert!((once.mean() - f.mean()).abs() <= 1e-12);
        }
    }
}
