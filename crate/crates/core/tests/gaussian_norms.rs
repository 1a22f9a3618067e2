//! Gaussian `L^r` norms against closed forms and brute-force tensor
//! quadrature.

mod common;

use std::f64::consts::PI;

use noisestab::gauss::{default_quad_order, normal_pdf, HermiteExpansion};
use noisestab::quad::gauss_hermite;
use rayon::prelude::*;

fn norm(f: &HermiteExpansion, r: f64) -> f64 {
    f.lr_norm_converged(r, default_quad_order(f), 1e-9).unwrap()
}

fn term(n: usize, degree: usize, terms: &[(&[u32], f64)]) -> HermiteExpansion {
    let terms: Vec<(Vec<u32>, f64)> = terms.iter().map(|(a, c)| (a.to_vec(), *c)).collect();
    HermiteExpansion::from_terms(n, degree, &terms).unwrap()
}

/// `E|f|^r` by a tensor Gauss–Hermite rule of high order; the kinks of
/// `|f|` slow it to algebraic convergence, which is ample at this order.
fn tensor_moment(f: &HermiteExpansion, r: f64, order: usize) -> f64 {
    let rule = gauss_hermite(order);
    let n = f.n();
    (0..order.pow(n as u32))
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; n];
            let mut w = 1.0;
            for xi in x.iter_mut() {
                *xi = rule.nodes[idx % order];
                w *= rule.weights[idx % order];
                idx /= order;
            }
            w * f.evaluate(&x).abs().powf(r)
        })
        .sum()
}

#[test]
fn closed_form_absolute_moments() {
    let half_moment = (2.0 / PI).sqrt();
    let cases = [
        (term(1, 1, &[(&[1], 1.0)]), half_moment),
        // h₂ = (x² − 1)/√2 and E|x² − 1| = 4φ(1)
        (term(1, 2, &[(&[2], 1.0)]), 4.0 * normal_pdf(1.0) / 2f64.sqrt()),
        (term(2, 1, &[(&[1, 0], 1.0), (&[0, 1], 1.0)]), 2.0 / PI.sqrt()),
        (term(2, 2, &[(&[1, 1], 1.0)]), 2.0 / PI),
        (term(3, 1, &[(&[1, 0, 0], 1.0), (&[0, 1, 0], 1.0), (&[0, 0, 1], 1.0)]), 3f64.sqrt() * half_moment),
        (term(3, 3, &[(&[1, 1, 1], 1.0)]), half_moment.powi(3)),
        (term(3, 2, &[(&[0, 0, 2], 1.0)]), 4.0 * normal_pdf(1.0) / 2f64.sqrt()),
    ];
    for (f, expected) in cases {
        let got = norm(&f, 1.0);
        assert!((got - expected).abs() < 1e-6 * expected, "n = {}: {got} vs {expected}", f.n());
    }
}

#[test]
fn second_moment_is_parseval() {
    let mut rng = common::rng(21);
    for (n, degree) in [(1, 6), (2, 4), (3, 3)] {
        let f = common::random_expansion(n, degree, &mut rng);
        let got = norm(&f, 2.0);
        assert!((got - f.l2_norm()).abs() < 1e-6 * f.l2_norm(), "n = {n}: {got} vs {}", f.l2_norm());
    }
}

#[test]
fn random_norms_match_tensor_quadrature() {
    let mut rng = common::rng(8);
    for (n, degree, order) in [(1, 6, 200), (2, 5, 160), (3, 3, 120)] {
        let f = common::random_expansion(n, degree, &mut rng);
        for r in [1.0, 1.5] {
            let got = norm(&f, r);
            let oracle = tensor_moment(&f, r, order).powf(1.0 / r);
            assert!((got - oracle).abs() < 5e-4 * oracle, "n = {n}, r = {r}: {got} vs {oracle}");
        }
    }
}

#[test]
fn norms_are_monotone_in_the_exponent() {
    let mut rng = common::rng(2);
    for n in 1..=3 {
        let f = common::random_expansion(n, 3, &mut rng);
        let norms: Vec<f64> = [1.0, 1.5, 2.0, 3.0].iter().map(|&r| norm(&f, r)).collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-7)), "{norms:?}");
    }
}
