//! Seeded function families shared by the integration tests.
#![allow(dead_code)]

use noisestab::boolean::builtins::{dictator, majority, parity, tribes};
use noisestab::boolean::Codomain;
use noisestab::bounds::{Member, Subject};
use noisestab::gauss::{HermiteExpansion, MultiIndexSet};
use noisestab::CubeFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_boolean(n: usize, p: f64, rng: &mut ChaCha8Rng) -> CubeFunction {
    let values = (0..1usize << n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    CubeFunction::new(n, p, values).unwrap()
}

pub fn random_real(n: usize, p: f64, rng: &mut ChaCha8Rng) -> CubeFunction {
    let values = (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect();
    CubeFunction::new(n, p, values).unwrap()
}

/// `count` random Boolean functions on `n` coordinates plus the built-ins
/// dictator, parity, majority and tribes on twelve (majority eleven).
pub fn boolean_family(count: usize, n: usize, p: f64, seed: u64) -> Vec<Member> {
    let mut r = rng(seed);
    let mut out: Vec<Member> = (0..count)
        .map(|k| Member::new(format!("random-{k}"), Subject::Cube(random_boolean(n, p, &mut r))))
        .collect();
    let builtins = [
        ("dictator", dictator(12, 0, Codomain::PlusMinusOne).unwrap()),
        ("parity", parity(12, Codomain::PlusMinusOne).unwrap()),
        ("majority", majority(11, Codomain::PlusMinusOne).unwrap()),
        ("tribes", tribes(3, 12, Codomain::ZeroOne).unwrap()),
    ];
    for (name, f) in builtins {
        out.push(Member::new(name, Subject::Cube(f.with_bias(p).unwrap())));
    }
    out
}

pub fn expansion(n: usize, degree: usize, coefficients: &[f64]) -> HermiteExpansion {
    let basis = MultiIndexSet::new(n, degree);
    let terms: Vec<(Vec<u32>, f64)> = basis.indices().iter().cloned().zip(coefficients.iter().copied()).collect();
    HermiteExpansion::from_terms(n, degree, &terms).unwrap()
}

/// Random expansion with Gaussian coefficients damped by `2^{−|α|}`.
pub fn random_expansion(n: usize, degree: usize, rng: &mut ChaCha8Rng) -> HermiteExpansion {
    let basis = MultiIndexSet::new(n, degree);
    let coefficients: Vec<f64> = basis
        .indices()
        .iter()
        .map(|a| {
            let level: u32 = a.iter().sum();
            let z: f64 = rng.sample(StandardNormal);
            z * 0.5f64.powi(level as i32)
        })
        .collect();
    expansion(n, degree, &coefficients)
}

/// Shifts the mean so that `‖f‖₂² ≥ 1.1 Σ‖∂_i f‖₂²`, which dominates
/// `Σ‖∂_i f‖₁²`; derivatives are unchanged.
pub fn lift_mean(f: &HermiteExpansion) -> HermiteExpansion {
    let energy: f64 = f
        .basis()
        .indices()
        .iter()
        .zip(f.coefficients())
        .map(|(a, c)| a.iter().sum::<u32>() as f64 * c * c)
        .sum();
    let mean = (1.1 * energy - f.variance()).max(f.mean().powi(2)).max(0.0).sqrt();
    let mut coefficients = f.coefficients().to_vec();
    coefficients[0] = mean;
    expansion(f.n(), f.degree(), &coefficients)
}

/// Fifty seeded expansions with `n ≤ 3`, degree `≤ 6`, mean lifted so that
/// none is vacuous.
pub fn gaussian_family(seed: u64) -> Vec<HermiteExpansion> {
    let mut r = rng(seed);
    (0..50)
        .map(|k| {
            let n = 1 + k % 3;
            let degree = 1 + (k / 3) % 6;
            lift_mean(&random_expansion(n, degree, &mut r))
        })
        .collect()
}
