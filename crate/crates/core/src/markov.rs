//! Reversible Markov generators on finite spaces and their semigroups.
//!
//! A [`Generator`] carries the matrix of `L` acting on tables together with
//! directional operators `Γ_i` whose squared norms add up to the Dirichlet
//! form, `ℰ(f,f) = Σ_i ‖Γ_i f‖₂²`. Normalizing weights live inside the
//! operators so that this identity holds with unit weights for every model.
//!
//! [`SemigroupEvolution`] diagonalizes `L` in the `μ`-weighted inner product by
//! conjugating with `√μ`, which makes `P_t = e^{tL}` exact for every `t`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::space::{FiniteProductSpace, TableFunction};

/// Largest state count for which a dense generator is built.
pub const MAX_DENSE_STATES: usize = 4096;

/// Eigenvalues below this modulus count as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;

const STRUCTURE_TOL: f64 = 1e-12;

/// Sparse linear operator on tables, one row of `(column, value)` per state.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseOperator {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Self {
        Self { rows }
    }

    /// Operator `x ↦ scale · (f(target(x)) − f(x))`.
    pub fn difference(targets: &[usize], scale: f64) -> Self {
        let rows = targets
            .iter()
            .enumerate()
            .map(|(x, &y)| if x == y { Vec::new() } else { vec![(y, scale), (x, -scale)] })
            .collect();
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(j, a)| a * values[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                m[(i, j)] += a;
            }
        }
        m
    }
}

/// A named directional operator `Γ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub name: String,
    pub op: SparseOperator,
}

impl Direction {
    pub fn new(name: impl Into<String>, op: SparseOperator) -> Self {
        Self { name: name.into(), op }
    }
}

#[derive(Debug, Clone)]
pub struct Generator {
    name: String,
    space: Arc<FiniteProductSpace>,
    matrix: DMatrix<f64>,
    directions: Vec<Direction>,
    kappa: f64,
    spectral_gap: Option<f64>,
    log_sobolev: Option<f64>,
}

impl Generator {
    /// Builds a generator after checking the Markov property, reversibility
    /// with respect to the space's weights and nonnegative jump rates.
    pub fn new(
        name: impl Into<String>,
        space: Arc<FiniteProductSpace>,
        matrix: DMatrix<f64>,
        directions: Vec<Direction>,
        kappa: f64,
    ) -> Result<Self> {
        let n = space.len();
        if n > MAX_DENSE_STATES {
            return Err(Error::SizeLimit(format!("{n} states exceed the dense limit {MAX_DENSE_STATES}")));
        }
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(invalid("generator matrix does not match the space"));
        }
        if let Some(d) = directions.iter().find(|d| d.op.dim() != n) {
            return Err(invalid(format!("direction {} has the wrong dimension", d.name)));
        }
        let w = space.weights();
        let scale = matrix.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
        for x in 0..n {
            let row_sum: f64 = matrix.row(x).iter().sum();
            if row_sum.abs() > STRUCTURE_TOL * scale {
                return Err(Error::DegenerateModel(format!("L1 ≠ 0 at state {x} (row sum {row_sum})")));
            }
            for y in 0..n {
                if x != y && matrix[(x, y)] < -STRUCTURE_TOL * scale {
                    return Err(Error::DegenerateModel(format!("negative rate L({x},{y})")));
                }
                let flux = w[x] * matrix[(x, y)] - w[y] * matrix[(y, x)];
                if flux.abs() > STRUCTURE_TOL * scale {
                    return Err(Error::DegenerateModel(format!("not reversible at ({x},{y})")));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            space,
            matrix,
            directions,
            kappa,
            spectral_gap: None,
            log_sobolev: None,
        })
    }

    /// The projection generator `Lf = ∫ f dμ − f`; on product spaces the
    /// directions are the per-factor projections `L_i = E_{μ_i} − Id`.
    ///
    /// Note that on product spaces `L` is the sum of the `L_i`, not the global
    /// projection; both have spectral gap 1.
    pub fn projection(space: Arc<FiniteProductSpace>) -> Result<Self> {
        let n = space.len();
        if n > MAX_DENSE_STATES {
            return Err(Error::SizeLimit(format!("{n} states exceed the dense limit {MAX_DENSE_STATES}")));
        }
        let generator = match space.factors() {
            None => {
                let w = space.weights();
                let matrix = DMatrix::from_fn(n, n, |x, y| w[y] - if x == y { 1.0 } else { 0.0 });
                // ℰ(f,f) = Var f = ‖f − ∫f‖₂², so the single direction is L itself.
                let rows = (0..n)
                    .map(|x| (0..n).map(|y| (y, matrix[(x, y)])).collect())
                    .collect();
                let direction = Direction::new("L", SparseOperator::new(rows));
                Self::new("projection", Arc::clone(&space), matrix, vec![direction], 0.0)?
            }
            Some(factors) => {
                let mut matrix = DMatrix::zeros(n, n);
                let mut directions = Vec::with_capacity(factors.len());
                for (k, w) in factors.iter().enumerate() {
                    let rows: Vec<Vec<(usize, f64)>> = (0..n)
                        .map(|x| {
                            let own = space.digit(x, k);
                            (0..w.len())
                                .map(|j| {
                                    let y = space.with_digit(x, k, j);
                                    (y, w[j] - if j == own { 1.0 } else { 0.0 })
                                })
                                .collect()
                        })
                        .collect();
                    let op = SparseOperator::new(rows);
                    matrix += op.to_dense();
                    directions.push(Direction::new(format!("L_{k}"), op));
                }
                Self::new("projection", Arc::clone(&space), matrix, directions, 0.0)?
            }
        };
        Ok(generator.with_spectral_gap(1.0))
    }

    pub fn with_spectral_gap(mut self, lambda: f64) -> Self {
        self.spectral_gap = Some(lambda);
        self
    }

    pub fn with_log_sobolev(mut self, rho: f64) -> Self {
        self.log_sobolev = Some(rho);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<FiniteProductSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn cached_spectral_gap(&self) -> Option<f64> {
        self.spectral_gap
    }

    pub fn cached_log_sobolev(&self) -> Option<f64> {
        self.log_sobolev
    }

    fn check_space(&self, f: &TableFunction) -> Result<()> {
        if f.space().as_ref() != self.space.as_ref() {
            return Err(invalid("function does not live on the generator's space"));
        }
        Ok(())
    }

    /// `Lf`.
    pub fn apply(&self, f: &TableFunction) -> Result<TableFunction> {
        self.check_space(f)?;
        let v = &self.matrix * DVector::from_column_slice(f.values());
        TableFunction::new(Arc::clone(&self.space), v.as_slice().to_vec())
    }

    /// `Γ_i f` for every direction.
    pub fn direction_values(&self, f: &TableFunction) -> Result<Vec<Vec<f64>>> {
        self.check_space(f)?;
        Ok(self.directions.iter().map(|d| d.op.apply(f.values())).collect())
    }

    /// `ℰ(f,h) = ∫ f (−Lh) dμ`.
    pub fn dirichlet_form(&self, f: &TableFunction, h: &TableFunction) -> Result<f64> {
        self.check_space(f)?;
        let lh = self.apply(h)?;
        Ok(-f.inner(&lh)?)
    }

    /// `Σ_i ‖Γ_i f‖₂²`.
    pub fn directional_energy(&self, f: &TableFunction) -> Result<f64> {
        let w = self.space.weights();
        Ok(self
            .direction_values(f)?
            .iter()
            .map(|g| g.iter().zip(w).map(|(v, p)| v * v * p).sum::<f64>())
            .sum())
    }

    /// Largest `|ℰ(f,f) − Σ_i ‖Γ_i f‖₂²|` over seeded random tables.
    pub fn decomposition_defect(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0_f64;
        for _ in 0..samples {
            let values: Vec<f64> = (0..self.space.len()).map(|_| rng.sample(StandardNormal)).collect();
            let f = TableFunction::new(Arc::clone(&self.space), values)?;
            let defect = (self.dirichlet_form(&f, &f)? - self.directional_energy(&f)?).abs();
            worst = worst.max(defect);
        }
        Ok(worst)
    }

    /// Spectral gap, from the cache when available.
    pub fn spectral_gap(&self) -> Result<f64> {
        match self.spectral_gap {
            Some(l) => Ok(l),
            None => SemigroupEvolution::new(Arc::new(self.clone()))?.spectral_gap(),
        }
    }
}

/// Spectral decomposition of a generator giving exact access to `P_t`.
#[derive(Debug, Clone)]
pub struct SemigroupEvolution {
    generator: Arc<Generator>,
    sqrt_weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    // columns are eigenvectors of the √μ-conjugated symmetric matrix
    basis: DMatrix<f64>,
}

impl SemigroupEvolution {
    pub fn new(generator: Arc<Generator>) -> Result<Self> {
        let n = generator.space.len();
        let sqrt_weights: Vec<f64> = generator.space.weights().iter().map(|w| w.sqrt()).collect();
        let m = &generator.matrix;
        let mut sym = DMatrix::from_fn(n, n, |x, y| sqrt_weights[x] * m[(x, y)] / sqrt_weights[y]);
        let transposed = sym.transpose();
        sym = (sym + transposed) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let basis = DMatrix::from_fn(n, n, |x, j| eig.eigenvectors[(x, order[j])]);
        if let Some(bad) = eigenvalues.iter().find(|&&l| l > ZERO_EIGENVALUE_TOL) {
            return Err(Error::DegenerateModel(format!("positive eigenvalue {bad}")));
        }
        Ok(Self { generator, sqrt_weights, eigenvalues, basis })
    }

    pub fn generator(&self) -> &Arc<Generator> {
        &self.generator
    }

    pub fn space(&self) -> &Arc<FiniteProductSpace> {
        self.generator.space()
    }

    /// Eigenvalues of `L`, in decreasing order (the first is 0).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `μ`-orthonormal eigenfunction for `eigenvalues()[k]`.
    pub fn eigenfunction(&self, k: usize) -> TableFunction {
        let values = (0..self.sqrt_weights.len())
            .map(|x| self.basis[(x, k)] / self.sqrt_weights[x])
            .collect();
        TableFunction::new(Arc::clone(self.space()), values).expect("dimension matches")
    }

    /// Mode amplitudes `⟨f, φ_k⟩_μ`.
    pub fn coefficients(&self, f: &TableFunction) -> Result<Vec<f64>> {
        self.generator.check_space(f)?;
        let scaled = DVector::from_iterator(
            f.values().len(),
            f.values().iter().zip(&self.sqrt_weights).map(|(v, s)| v * s),
        );
        Ok((self.basis.transpose() * scaled).as_slice().to_vec())
    }

    fn synthesize(&self, coefficients: &[f64]) -> TableFunction {
        let v = &self.basis * DVector::from_column_slice(coefficients);
        let values = v.iter().zip(&self.sqrt_weights).map(|(x, s)| x / s).collect();
        TableFunction::new(Arc::clone(self.space()), values).expect("dimension matches")
    }

    /// `P_t f = e^{tL} f`.
    pub fn apply(&self, t: f64, f: &TableFunction) -> Result<TableFunction> {
        if !(t >= 0.0) {
            return Err(invalid(format!("semigroup time {t} must be nonnegative")));
        }
        if t == 0.0 {
            self.generator.check_space(f)?;
            return Ok(f.clone());
        }
        let mut c = self.coefficients(f)?;
        for (ck, &l) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= (t * l).exp();
        }
        Ok(self.synthesize(&c))
    }

    pub fn zero_modes(&self) -> usize {
        self.eigenvalues.iter().filter(|l| l.abs() < ZERO_EIGENVALUE_TOL).count()
    }

    /// Smallest nonzero eigenvalue of `−L`.
    pub fn spectral_gap(&self) -> Result<f64> {
        let zeros = self.zero_modes();
        if zeros != 1 {
            return Err(Error::DegenerateModel(format!("{zeros} zero eigenvalues; the chain is not ergodic")));
        }
        self.eigenvalues
            .iter()
            .find(|l| l.abs() >= ZERO_EIGENVALUE_TOL)
            .map(|l| -l)
            .ok_or_else(|| Error::DegenerateModel("single-state space has no gap".into()))
    }

    /// `‖P_t f‖_q / ‖f‖_p` with `p = 1 + (q − 1) e^{−2ρt}`.
    pub fn hypercontractivity_ratio(&self, f: &TableFunction, t: f64, q: f64, rho: f64) -> Result<f64> {
        if !(q > 1.0) || !(rho > 0.0) {
            return Err(invalid(format!("need q > 1 and ρ > 0 (got q = {q}, ρ = {rho})")));
        }
        let p = 1.0 + (q - 1.0) * (-2.0 * rho * t).exp();
        let denominator = f.lp_norm(p)?;
        if denominator == 0.0 {
            return Err(Error::UndefinedRatio("f vanishes identically".into()));
        }
        Ok(self.apply(t, f)?.lp_norm(q)? / denominator)
    }

    /// `max_{i,x} |Γ_i P_t f|(x) − e^{κt} P_t|Γ_i f|(x)`.
    pub fn commutation_violation(&self, f: &TableFunction, t: f64) -> Result<f64> {
        let g = &self.generator;
        let evolved = self.apply(t, f)?;
        let growth = (g.kappa * t).exp();
        let mut worst = f64::NEG_INFINITY;
        for d in &g.directions {
            let lhs = d.op.apply(evolved.values());
            let abs_dir = TableFunction::new(Arc::clone(g.space()), d.op.apply(f.values()).iter().map(|v| v.abs()).collect())?;
            let rhs = self.apply(t, &abs_dir)?;
            for (a, b) in lhs.iter().zip(rhs.values()) {
                worst = worst.max(a.abs() - growth * b);
            }
        }
        Ok(if worst.is_finite() { worst } else { 0.0 })
    }

    /// Both sides of `Var f ≤ (‖f‖₂² − ‖P_T f‖₂²) / (1 − e^{−λT})` with `f`
    /// centered first.
    pub fn variance_gap_bound(&self, f: &TableFunction, lambda: f64, horizon: f64) -> Result<(f64, f64)> {
        if !(horizon > 0.0) || !(lambda > 0.0) {
            return Err(invalid("need T > 0 and λ > 0"));
        }
        let centered = f.centered();
        let lhs = centered.variance();
        let norm = centered.lp_norm(2.0)?;
        let evolved = self.apply(horizon, &centered)?.lp_norm(2.0)?;
        let rhs = (norm * norm - evolved * evolved).max(0.0) / (1.0 - (-lambda * horizon).exp());
        Ok((lhs, rhs))
    }

    /// `Var(P_t f)` against `2 ∫_t^∞ Σ_i ‖Γ_i P_s f‖₂² ds`, the time integral
    /// evaluated mode by mode through the directional operators.
    pub fn variance_decomposition(&self, f: &TableFunction, t: f64) -> Result<(f64, f64)> {
        let lhs = self.apply(t, f)?.variance();
        let coeffs = self.coefficients(f)?;
        let active: Vec<usize> = (0..coeffs.len())
            .filter(|&k| coeffs[k] != 0.0 && self.eigenvalues[k].abs() >= ZERO_EIGENVALUE_TOL)
            .collect();
        let w = self.space().weights();
        let mut rhs = 0.0;
        for d in self.generator.directions() {
            let images: Vec<Vec<f64>> =
                active.iter().map(|&k| d.op.apply(self.eigenfunction(k).values())).collect();
            for (a, &k) in active.iter().enumerate() {
                for (b, &l) in active.iter().enumerate() {
                    let rate = self.eigenvalues[k] + self.eigenvalues[l];
                    let gram: f64 = images[a].iter().zip(&images[b]).zip(w).map(|((x, y), p)| x * y * p).sum();
                    rhs += coeffs[k] * coeffs[l] * gram * (rate * t).exp() / (-rate);
                }
            }
        }
        Ok((lhs, 2.0 * rhs))
    }
}

/// Outcome of the variational log-Sobolev search.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSobolevEstimate {
    /// Smallest quotient value found, `min(search, λ)`.
    pub value: f64,
    /// Best quotient reached by descent alone.
    pub search_value: f64,
    pub spectral_gap: f64,
    /// Table attaining `search_value`.
    pub minimizer: Vec<f64>,
}

/// `2ℰ(f,f) / Ent_μ(f²)`.
pub fn log_sobolev_quotient(g: &Generator, f: &TableFunction) -> Result<f64> {
    let energy = g.dirichlet_form(f, f)?;
    let ent = f.map(|x| x * x).entropy()?;
    if ent <= 0.0 {
        return Err(Error::UndefinedRatio("Ent(f²) vanishes".into()));
    }
    Ok(2.0 * energy / ent)
}

/// Variational upper bound on the log-Sobolev constant.
///
/// Minimizes `2ℰ(f,f)/Ent(f²)` over `f = 1 + g` with `g` ranging over the
/// `μ`-orthogonal complement of constants, by projected gradient descent from
/// `restarts` seeded random starts. Along `1 + εφ` with `φ` the gap
/// eigenfunction the quotient tends to `λ` as `ε → 0`, so `λ` itself is a
/// limit value of the quotient and the result never exceeds it.
pub fn log_sobolev_search(ev: &SemigroupEvolution, restarts: usize, tol: f64, seed: u64) -> Result<LogSobolevEstimate> {
    let lambda = ev.spectral_gap()?;
    let g = ev.generator();
    let space = Arc::clone(g.space());
    let n = space.len();
    let gap_mode = ev.eigenfunction(1);
    let results: Vec<Option<(f64, Vec<f64>)>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k as u64 + 1)));
            let mut start: Vec<f64> = if k < 2 {
                let sign = if k == 0 { 1.0 } else { -1.0 };
                gap_mode.values().iter().map(|v| sign * 0.5 * v).collect()
            } else {
                let amp = 10f64.powf(rng.random_range(-0.7..0.7));
                (0..n).map(|_| amp * rng.sample::<f64, _>(StandardNormal)).collect()
            };
            center(&mut start, space.weights());
            descend(g, &space, start, tol).ok()
        })
        .collect();
    let (search_value, minimizer) = results
        .into_iter()
        .flatten()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::Numeric("every log-Sobolev restart degenerated".into()))?;
    Ok(LogSobolevEstimate { value: search_value.min(lambda), search_value, spectral_gap: lambda, minimizer })
}

/// [`log_sobolev_search`] returning only the value.
pub fn log_sobolev_constant(ev: &SemigroupEvolution, restarts: usize, tol: f64, seed: u64) -> Result<f64> {
    Ok(log_sobolev_search(ev, restarts, tol, seed)?.value)
}

fn center(values: &mut [f64], weights: &[f64]) {
    let m: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    values.iter_mut().for_each(|v| *v -= m);
}

fn quotient_and_gradient(g: &Generator, space: &Arc<FiniteProductSpace>, pert: &[f64]) -> Option<(f64, Vec<f64>)> {
    let w = space.weights();
    let f: Vec<f64> = pert.iter().map(|p| 1.0 + p).collect();
    let table = TableFunction::new(Arc::clone(space), f.clone()).ok()?;
    let minus_lf: Vec<f64> = g.apply(&table).ok()?.values().iter().map(|v| -v).collect();
    let energy: f64 = f.iter().zip(&minus_lf).zip(w).map(|((a, b), p)| a * b * p).sum();
    let second: f64 = f.iter().zip(w).map(|(a, p)| a * a * p).sum();
    let sq: Vec<f64> = f.iter().map(|x| x * x).collect();
    let ent = crate::space::entropy_weighted(&sq, w).ok()?;
    // entropies this small are rounding noise relative to the second moment
    if !(ent > 1e-9 * second) {
        return None;
    }
    let q = 2.0 * energy / ent;
    let log_m = second.ln();
    let grad: Vec<f64> = f
        .iter()
        .zip(&minus_lf)
        .map(|(&x, &lf)| {
            let d_ent = if x != 0.0 { 2.0 * x * ((x * x).ln() - log_m) } else { 0.0 };
            (2.0 * 2.0 * lf * ent - 2.0 * energy * d_ent) / (ent * ent)
        })
        .collect();
    let mut grad = grad;
    center(&mut grad, w);
    Some((q, grad))
}

fn descend(g: &Generator, space: &Arc<FiniteProductSpace>, mut pert: Vec<f64>, tol: f64) -> Result<(f64, Vec<f64>)> {
    let w = space.weights();
    let (mut q, mut grad) = quotient_and_gradient(g, space, &pert)
        .ok_or_else(|| Error::Numeric("degenerate start".into()))?;
    let mut step = 1.0;
    for _ in 0..20_000 {
        let norm_sq: f64 = grad.iter().zip(w).map(|(d, p)| d * d * p).sum();
        if norm_sq == 0.0 {
            break;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = pert.iter().zip(&grad).map(|(x, d)| x - step * d).collect();
            if let Some((qt, gt)) = quotient_and_gradient(g, space, &trial) {
                if qt <= q - 1e-4 * step * norm_sq {
                    accepted = Some((qt, gt, trial));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((qt, gt, trial)) = accepted else { break };
        let rel = (q - qt) / q.abs().max(1e-300);
        q = qt;
        grad = gt;
        pert = trial;
        step *= 2.0;
        if rel < tol {
            break;
        }
    }
    Ok((q, pert))
}
