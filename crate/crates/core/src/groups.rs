//! Random walks on Cayley graphs: the symmetric group generated by all
//! transpositions, and discrete tori `(ℤ/mℤ)ⁿ` generated by `{±e_i}`.
//!
//! The walk jumps from `g` to `gs` for a uniform `s ∈ S`, so
//! `K(g₁, g₂) = |S|⁻¹ 1_S(g₁⁻¹g₂)`; since `S` is closed under inversion and
//! conjugation this equals `|S|⁻¹ 1_S(g₁g₂⁻¹)`. With `D_s f(g) = f(gs) − f(g)`,
//! `ℰ(f,f) = (2|S|)⁻¹ Σ_s ‖D_s f‖₂²`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::markov::{Direction, Generator, SparseOperator, MAX_DENSE_STATES};
use crate::space::{FiniteProductSpace, TableFunction};

/// Largest `n` for the symmetric group (720 elements).
pub const MAX_SYMMETRIC_N: usize = 6;
/// Largest torus for influence computations.
pub const MAX_TORUS_STATES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Symmetric { n: usize },
    Torus { m: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CayleyModel {
    kind: GroupKind,
    space: Arc<FiniteProductSpace>,
    generator_names: Vec<String>,
    // permutations in rank order, and right multiplication by each generator
    permutations: Vec<Vec<u8>>,
    right: Vec<Vec<usize>>,
}

impl CayleyModel {
    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn space(&self) -> &Arc<FiniteProductSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.space.len()
    }

    /// `|S|`.
    pub fn generator_count(&self) -> usize {
        self.generator_names.len()
    }

    pub fn generator_names(&self) -> &[String] {
        &self.generator_names
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.generator_names.iter().position(|s| s == name)
    }

    /// Index of `g·s`.
    pub fn act(&self, g: usize, s: usize) -> usize {
        match self.kind {
            GroupKind::Symmetric { .. } => self.right[s][g],
            GroupKind::Torus { m, .. } => {
                let (coordinate, step) = torus_step(m, s);
                let digit = self.space.digit(g, coordinate);
                self.space.with_digit(g, coordinate, (digit + step) % m)
            }
        }
    }

    /// The permutation `σ` with `σ[i] = σ(i)`, for symmetric-group models.
    pub fn permutation(&self, g: usize) -> Option<&[u8]> {
        self.permutations.get(g).map(Vec::as_slice)
    }

    pub fn element_label(&self, g: usize) -> String {
        match self.kind {
            GroupKind::Symmetric { .. } => {
                let p: Vec<String> = self.permutations[g].iter().map(u8::to_string).collect();
                format!("[{}]", p.join(","))
            }
            GroupKind::Torus { .. } => {
                let d: Vec<String> = (0..self.space.factor_count()).map(|k| self.space.digit(g, k).to_string()).collect();
                format!("({})", d.join(","))
            }
        }
    }

    /// `K(g₁, g₂)`.
    pub fn kernel(&self, g1: usize, g2: usize) -> f64 {
        let hits = (0..self.generator_count()).filter(|&s| self.act(g1, s) == g2).count();
        hits as f64 / self.generator_count() as f64
    }

    pub fn function(&self, f: impl FnMut(usize) -> f64) -> TableFunction {
        TableFunction::from_fn(Arc::clone(&self.space), f)
    }

    fn check_function(&self, f: &TableFunction) -> Result<()> {
        if f.space().as_ref() != self.space.as_ref() {
            return Err(Error::ModelMismatch("function does not live on this group".into()));
        }
        Ok(())
    }

    fn check_generator(&self, s: usize) -> Result<()> {
        if s >= self.generator_count() {
            return Err(invalid(format!("generator {s} is not in S (|S| = {})", self.generator_count())));
        }
        Ok(())
    }

    /// `D_s f`.
    pub fn derivative(&self, f: &TableFunction, s: usize) -> Result<Vec<f64>> {
        self.check_function(f)?;
        self.check_generator(s)?;
        let v = f.values();
        Ok((0..self.order()).map(|g| v[self.act(g, s)] - v[g]).collect())
    }

    /// `‖D_s f‖_r`; `r = 1` is the influence of `s` on `f`.
    pub fn derivative_norm(&self, f: &TableFunction, s: usize, r: f64) -> Result<f64> {
        let d = self.derivative(f, s)?;
        f.with_values(d)?.lp_norm(r)
    }

    /// `μ{g ∈ A, gs ∉ A}`.
    pub fn cayley_influence(&self, a: &TableFunction, s: usize) -> Result<f64> {
        self.check_function(a)?;
        self.check_generator(s)?;
        let v = a.values();
        if v.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::Domain("influence of a set needs a 0/1-valued function".into()));
        }
        let count = (0..self.order()).filter(|&g| v[g] == 1.0 && v[self.act(g, s)] == 0.0).count();
        Ok(count as f64 / self.order() as f64)
    }

    /// `m^{−n} Σ_i Σ_x |f(x ⊕ e_i) − f(x)|` with the one-sided steps `+e_i`.
    pub fn total_influence(&self, f: &TableFunction) -> Result<f64> {
        let GroupKind::Torus { m, n } = self.kind else {
            return Err(Error::ModelMismatch("total influence is defined on tori".into()));
        };
        let step = if m == 2 { 1 } else { 2 };
        let mut total = 0.0;
        for i in 0..n {
            total += self.derivative_norm(f, step * i, 1.0)?;
        }
        Ok(total)
    }

    /// Dense generator `L = K − Id` with directions scaled so that
    /// `Σ ‖Γ f‖₂² = ℰ(f,f)`; `κ = 0`.
    pub fn generator(&self) -> Result<Generator> {
        let size = self.order();
        if size > MAX_DENSE_STATES {
            return Err(Error::SizeLimit(format!("{size} elements exceed the dense limit {MAX_DENSE_STATES}")));
        }
        let count = self.generator_count();
        let mut matrix = DMatrix::from_fn(size, size, |x, y| if x == y { -1.0 } else { 0.0 });
        for g in 0..size {
            for s in 0..count {
                matrix[(g, self.act(g, s))] += 1.0 / count as f64;
            }
        }
        let directions: Vec<Direction> = match self.kind {
            GroupKind::Symmetric { .. } => (0..count)
                .map(|s| {
                    let targets: Vec<usize> = (0..size).map(|g| self.act(g, s)).collect();
                    let scale = (2.0 * count as f64).sqrt().recip();
                    Direction::new(format!("D_{}", self.generator_names[s]), SparseOperator::difference(&targets, scale))
                })
                .collect(),
            GroupKind::Torus { m, n } => {
                // ‖D_{−e_i} f‖ = ‖D_{e_i} f‖, so the pair folds into one direction
                let multiplicity = if m == 2 { 1.0 } else { 2.0 };
                let step = if m == 2 { 1 } else { 2 };
                (0..n)
                    .map(|i| {
                        let targets: Vec<usize> = (0..size).map(|g| self.act(g, step * i)).collect();
                        let scale = (multiplicity / (2.0 * count as f64)).sqrt();
                        Direction::new(format!("D_e{i}"), SparseOperator::difference(&targets, scale))
                    })
                    .collect()
            }
        };
        let name = match self.kind {
            GroupKind::Symmetric { n } => format!("symmetric(n={n})"),
            GroupKind::Torus { m, n } => format!("torus(m={m},n={n})"),
        };
        let generator = Generator::new(name, Arc::clone(&self.space), matrix, directions, 0.0)?;
        Ok(match self.kind {
            GroupKind::Symmetric { n } => generator.with_spectral_gap(2.0 / (n as f64 - 1.0)),
            GroupKind::Torus { m, .. } => {
                // slowest mode e^{2πi x_k/m} in one coordinate
                let multiplicity = if m == 2 { 1.0 } else { 2.0 };
                let per = 1.0 - (2.0 * std::f64::consts::PI / m as f64).cos();
                generator.with_spectral_gap(per * multiplicity / count as f64)
            }
        })
    }
}

/// Coordinate and forward step of generator `s` on `(ℤ/mℤ)ⁿ`.
fn torus_step(m: usize, s: usize) -> (usize, usize) {
    if m == 2 {
        (s, 1)
    } else if s.is_multiple_of(2) {
        (s / 2, 1)
    } else {
        (s / 2, m - 1)
    }
}

fn permutations(n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut current: Vec<u8> = (0..n as u8).collect();
    loop {
        out.push(current.clone());
        // next permutation in lexicographic order
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else { break };
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).expect("pivot has a successor");
        current.swap(i - 1, j);
        current[i..].reverse();
    }
    out
}

/// Lexicographic rank (Lehmer code).
fn rank(p: &[u8]) -> usize {
    let n = p.len();
    let mut r = 0;
    for i in 0..n {
        let smaller = p[i + 1..].iter().filter(|&&x| x < p[i]).count();
        r = r * (n - i) + smaller;
    }
    r
}

/// `S_n` with all `n(n−1)/2` transpositions, acting by `σ ↦ στ`.
pub fn build_symmetric_group(n: usize) -> Result<CayleyModel> {
    if n < 2 {
        return Err(invalid("the symmetric group needs n ≥ 2"));
    }
    if n > MAX_SYMMETRIC_N {
        return Err(Error::SizeLimit(format!("symmetric group limited to n ≤ {MAX_SYMMETRIC_N}")));
    }
    let perms = permutations(n);
    let mut names = Vec::new();
    let mut right = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            names.push(format!("({a} {b})"));
            right.push(
                perms
                    .iter()
                    .map(|p| {
                        let mut q = p.clone();
                        q.swap(a, b);
                        rank(&q)
                    })
                    .collect(),
            );
        }
    }
    Ok(CayleyModel {
        kind: GroupKind::Symmetric { n },
        space: Arc::new(FiniteProductSpace::uniform(perms.len())?),
        generator_names: names,
        permutations: perms,
        right,
    })
}

/// `(ℤ/mℤ)ⁿ` with `S = {±e_i}` (just `{e_i}` when `m = 2`). Coordinate `k`
/// is digit `k` of the state index, least significant first.
pub fn build_torus(m: usize, n: usize) -> Result<CayleyModel> {
    if m < 2 || n == 0 {
        return Err(invalid("a torus needs m ≥ 2 and n ≥ 1"));
    }
    let size = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > MAX_TORUS_STATES as u128 {
        return Err(Error::SizeLimit(format!("m^n = {m}^{n} exceeds {MAX_TORUS_STATES}")));
    }
    let mut names = Vec::new();
    for i in 0..n {
        if m == 2 {
            names.push(format!("e{i}"));
        } else {
            names.push(format!("+e{i}"));
            names.push(format!("-e{i}"));
        }
    }
    Ok(CayleyModel {
        kind: GroupKind::Torus { m, n },
        space: Arc::new(FiniteProductSpace::uniform_product(m, n)?),
        generator_names: names,
        permutations: Vec::new(),
        right: Vec::new(),
    })
}
