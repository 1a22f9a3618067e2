//! Acceptance criteria, one PASS/FAIL line each.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use noisestab::boolean::builtins::{dictator, tribes};
use noisestab::boolean::{
    bonami_beckner_kernel, build_cube_generator, noise_operator, two_point_log_sobolev, Codomain,
};
use noisestab::bounds::{default_noise_grid, default_time_grid, verify, BoundId, BoundSpec, Clock, Member, Subject};
use noisestab::gauss::{
    gaussian_noise_stability_box, gaussian_noise_stability_mc, kms_example, HalfspaceBox, HermiteExpansion,
};
use noisestab::groups::{build_symmetric_group, build_torus};
use noisestab::junta::{junta_extract, junta_sweep, JuntaTarget, Rounding};
use noisestab::markov::log_sobolev_constant;
use noisestab::quad::gauss_hermite;
use noisestab::{Generator, SemigroupEvolution, TableFunction};
use rand::Rng;
use rayon::prelude::*;

use common::{boolean_family, gaussian_family, random_expansion, random_real, rng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn semigroup_identities() -> Outcome {
    let mut r = rng(1);
    let fs: Vec<_> = (0..100).map(|_| random_real(4, 0.5, &mut r)).collect();
    let (mut worst_cov, mut worst_kernel) = (0.0f64, 0.0f64);
    for f in &fs {
        let w = f.weights();
        for &t in &default_time_grid() {
            let half = noise_operator(f, t / 2.0).unwrap().variance();
            let full = noise_operator(f, t).unwrap();
            let m = f.mean();
            let cov: f64 = f.values().iter().zip(full.values()).zip(&w).map(|((a, b), p)| a * b * p).sum::<f64>() - m * m;
            worst_cov = worst_cov.max((half - cov).abs());
            let kernel = bonami_beckner_kernel(f, t).unwrap();
            for (a, b) in kernel.values().iter().zip(full.values()) {
                worst_kernel = worst_kernel.max((a - b).abs());
            }
        }
    }
    check(
        worst_cov <= 1e-10 && worst_kernel <= 1e-10,
        format!("max |Var(T_t/2 f) - Cov(f, T_t f)| = {worst_cov:.2e}, max kernel gap = {worst_kernel:.2e}"),
    )
}

fn cube_l1_sweep() -> Outcome {
    let family = boolean_family(1000, 5, 0.5, 2);
    let report = verify(&BoundSpec::new(BoundId::CubeL1), &family, &default_time_grid()).map_err(|e| e.to_string())?;
    let s = &report.summary;
    check(
        s.passed,
        format!(
            "{} instances, {} vacuous, max ratio {:.4}, violations {}",
            s.instances,
            s.vacuous,
            s.max_ratio.unwrap_or(0.0),
            s.violations
        ),
    )
}

fn biased_sweeps() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for p in [0.1, 0.3] {
        let family = boolean_family(1000, 5, p, 3);
        let specs = [
            BoundSpec::new(BoundId::BiasedW),
            BoundSpec::new(BoundId::ProductLr),
            BoundSpec::new(BoundId::ProductLr).with_r(1.5),
            BoundSpec::new(BoundId::ProductLr).with_r(2.0),
        ];
        for spec in specs {
            let report = verify(&spec, &family, &default_time_grid()).map_err(|e| e.to_string())?;
            let s = &report.summary;
            ok &= s.passed;
            lines.push(format!(
                "p={p} {} r={}: max ratio {:.4} ({} vacuous, {} violations)",
                spec.bound,
                spec.r,
                s.max_ratio.unwrap_or(0.0),
                s.vacuous,
                s.violations
            ));
        }
    }
    check(ok, lines.join("; "))
}

fn gap_of(g: Generator) -> f64 {
    SemigroupEvolution::new(Arc::new(g)).unwrap().spectral_gap().unwrap()
}

fn constants() -> Outcome {
    let mut lines = Vec::new();
    let cube = gap_of(build_cube_generator(4, 0.5).unwrap());
    let mut ok = (cube - 1.0).abs() <= 1e-9;
    lines.push(format!("cube gap {cube:.12}"));
    for n in [3, 4, 5] {
        let g = gap_of(build_symmetric_group(n).unwrap().generator().unwrap());
        let want = 2.0 / (n as f64 - 1.0);
        ok &= (g - want).abs() <= 1e-9;
        lines.push(format!("S{n} gap {g:.12}"));
    }
    for p in [0.2, 0.35, 0.5] {
        let ev = SemigroupEvolution::new(Arc::new(build_cube_generator(1, p).unwrap())).unwrap();
        let found = log_sobolev_constant(&ev, 24, 1e-12, 7).unwrap();
        let closed = two_point_log_sobolev(p);
        let rel = (found - closed).abs() / closed;
        ok &= rel <= 0.01;
        lines.push(format!("p={p} log-Sobolev {found:.6} vs {closed:.6}"));
    }
    check(ok, lines.join("; "))
}

fn hypercontractivity() -> Outcome {
    let evolutions: Vec<SemigroupEvolution> = (1..=4)
        .map(|n| SemigroupEvolution::new(Arc::new(build_cube_generator(n, 0.5).unwrap())).unwrap())
        .collect();
    let grid = default_time_grid();
    let worst = (0..10_000u64)
        .into_par_iter()
        .map(|k| {
            let ev = &evolutions[(k % 4) as usize];
            let mut r = rng(1000 + k);
            let f = TableFunction::from_fn(Arc::clone(ev.space()), |_| r.random_range(-1.0..1.0));
            let mut worst = f64::NEG_INFINITY;
            for q in [3.0, 4.0] {
                for &t in &grid {
                    worst = worst.max(ev.hypercontractivity_ratio(&f, t, q, 1.0).unwrap() - 1.0);
                }
            }
            worst
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    check(worst <= 1e-9, format!("10000 functions, max ‖P_t f‖_q/‖f‖_p − 1 = {worst:.3e}"))
}

fn gaussian_l1() -> Outcome {
    let family: Vec<Member> = gaussian_family(6)
        .into_iter()
        .enumerate()
        .map(|(k, f)| Member::new(format!("hermite-{k}"), Subject::Hermite(f)))
        .collect();
    let report = verify(&BoundSpec::new(BoundId::GaussL1), &family, &default_time_grid()).map_err(|e| e.to_string())?;
    let s = &report.summary;
    check(
        s.passed && s.vacuous == 0,
        format!("{} instances, {} vacuous, max ratio {:.4}", s.instances, s.vacuous, s.max_ratio.unwrap_or(0.0)),
    )
}

fn gaussian_oracles() -> Outcome {
    let half = HalfspaceBox::gaussian(vec![0.0]).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for (k, eta) in [0.3, 0.6, 0.9].into_iter().enumerate() {
        let exact = gaussian_noise_stability_box(&half, eta).unwrap();
        let closed = (1.0 - eta * eta).sqrt().asin() / (2.0 * std::f64::consts::PI);
        let mc = gaussian_noise_stability_mc(|x| half.indicator(x), 1, eta, 1_000_000, 40 + k as u64).unwrap();
        ok &= mc.agrees_with(exact, 4.0) && (exact - closed).abs() < 1e-12;
        lines.push(format!("η={eta}: {exact:.6} vs MC {:.6}±{:.1e}", mc.estimate, mc.stderr));
    }
    let rule = gauss_hermite(30);
    let mut worst = 0.0f64;
    for alpha in [[1u32], [2]] {
        let h = HermiteExpansion::basis_element(&alpha, 2).unwrap();
        for t in [0.1, 0.7, 2.0] {
            let pt = h.ou_apply(t).unwrap();
            let (e, s) = ((-t).exp(), (1.0 - (-2.0 * t).exp()).sqrt());
            for x in [-2.5, -0.4, 0.0, 1.1, 3.0] {
                let mehler = rule.integrate(|y| h.evaluate(&[e * x + s * y]));
                worst = worst.max((pt.evaluate(&[x]) - mehler).abs());
            }
        }
    }
    ok &= worst <= 1e-8;
    lines.push(format!("OU vs Mehler max gap {worst:.1e}"));
    check(ok, lines.join("; "))
}

fn influence_scaling() -> Outcome {
    let points: Vec<_> = (4..=12).map(|k| kms_example(1 << k, 2.0).unwrap()).collect();
    let ratios: Vec<f64> = points.iter().map(|p| p.scaled_ratio).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let trend = if ratios.windows(2).all(|w| w[1] >= w[0]) {
        "nondecreasing"
    } else if ratios.windows(2).all(|w| w[1] <= w[0]) {
        "nonincreasing"
    } else {
        "mixed"
    };
    let listed: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    check(hi / lo <= 10.0, format!("n·I/(log n)^(1/2) = [{}], spread {:.3}, {trend}", listed.join(", "), hi / lo))
}

fn commutation_and_gap_bound() -> Outcome {
    let mut models: Vec<(String, Generator)> = vec![
        ("cube n=3".into(), build_cube_generator(3, 0.5).unwrap()),
        ("cube n=3 p=0.3".into(), build_cube_generator(3, 0.3).unwrap()),
    ];
    for n in [3, 4] {
        models.push((format!("S{n}"), build_symmetric_group(n).unwrap().generator().unwrap()));
    }
    for (m, n) in [(3, 2), (2, 3), (5, 2)] {
        models.push((format!("torus {m}^{n}"), build_torus(m, n).unwrap().generator().unwrap()));
    }
    let (mut worst_comm, mut worst_gap) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (k, (_, g)) in models.into_iter().enumerate() {
        let ev = SemigroupEvolution::new(Arc::new(g)).unwrap();
        let lambda = ev.spectral_gap().unwrap();
        let mut r = rng(500 + k as u64);
        for _ in 0..10 {
            let f = TableFunction::from_fn(Arc::clone(ev.space()), |_| r.random_range(-1.0..1.0));
            for t in [0.1, 0.5, 1.0, 3.0] {
                worst_comm = worst_comm.max(ev.commutation_violation(&f, t).unwrap());
                let (lhs, rhs) = ev.variance_gap_bound(&f, lambda, t).unwrap();
                worst_gap = worst_gap.max(lhs - rhs);
            }
        }
    }
    check(
        worst_comm <= 1e-9 && worst_gap <= 1e-12,
        format!("7 models, max commutation excess {worst_comm:.2e}, max Var − bound {worst_gap:.2e}"),
    )
}

fn juntas() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let d = dictator(10, 3, Codomain::ZeroOne).unwrap();
    let rd = junta_extract(JuntaTarget::Cube(&d), 0.1, 0.5, Rounding::Nearest).unwrap();
    ok &= rd.coordinates == vec![3] && rd.l1_error == 0.0;
    lines.push(format!("dictator S={:?} error {}", rd.coordinates, rd.l1_error));
    let f = tribes(3, 12, Codomain::ZeroOne).unwrap();
    let best = (1..=8)
        .map(|k| junta_extract(JuntaTarget::Cube(&f), 0.3, 0.5f64.powi(k), Rounding::Nearest).unwrap())
        .min_by(|a, b| a.l1_error.total_cmp(&b.l1_error))
        .unwrap();
    ok &= best.l1_error <= 0.1;
    lines.push(format!("tribes error {:.4} with |S|={} at η={}", best.l1_error, best.size(), best.params.eta));
    let mut r = rng(77);
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    let full: Vec<(f64, f64)> =
        [0.1, 0.5, 1.0, 2.0].iter().flat_map(|&t| [0.5, 0.2, 0.05, 0.01].map(|eta| (t, eta))).collect();
    // three coordinates make each L¹ error a nested quadrature, so they get a corner subgrid
    let corners = [(0.1, 0.5), (0.1, 0.01), (2.0, 0.5), (2.0, 0.01)];
    for k in 0..18 {
        let n = 1 + k % 3;
        let f = random_expansion(n, 1 + (k / 3) % 6, &mut r);
        let cells: &[(f64, f64)] = if n == 3 { &corners } else { &full };
        for res in junta_sweep(JuntaTarget::Hermite(&f), cells, Rounding::None).unwrap() {
            let sup = res.sup_estimate.unwrap();
            // excess for f/M, the sup-normalized function
            worst = worst.max((res.l2_tail - res.tail_bound.unwrap()) / sup);
            count += 1;
        }
    }
    ok &= worst <= 1e-8;
    lines.push(format!("{count} Gaussian tail checks, max excess {worst:.3e}"));
    check(ok, lines.join("; "))
}

fn corollary_audit() -> Outcome {
    let cube = boolean_family(1000, 5, 0.5, 2);
    let spec = BoundSpec::new(BoundId::CubeNoise).with_clock(Clock::Noise);
    let cube_report = verify(&spec, &cube, &default_noise_grid()).map_err(|e| e.to_string())?;
    let mut r = rng(11);
    let mut boxes = vec![Member::new("half-space", Subject::Box(HalfspaceBox::gaussian(vec![0.0]).unwrap()))];
    for k in 0..40 {
        let n = 1 + k % 4;
        let thresholds = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        boxes.push(Member::new(format!("box-{k}"), Subject::Box(HalfspaceBox::gaussian(thresholds).unwrap())));
    }
    let etas: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
    let spec = BoundSpec::new(BoundId::GaussSets).with_clock(Clock::Noise);
    let box_report = verify(&spec, &boxes, &etas).map_err(|e| e.to_string())?;
    let (a, b) = (&cube_report.summary, &box_report.summary);
    check(
        a.theorem_violations == 0 && b.theorem_violations == 0,
        format!(
            "cube noise form: {} verbatim violations / {} non-vacuous (theorem form max ratio {:.4}); \
             Gaussian sets: {} verbatim violations / {} non-vacuous (theorem form max ratio {:.4})",
            a.violations,
            a.instances - a.vacuous,
            a.theorem_max_ratio.unwrap_or(0.0),
            b.violations,
            b.instances - b.vacuous,
            b.theorem_max_ratio.unwrap_or(0.0)
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("semigroup identities", semigroup_identities),
        ("uniform cube L1 bound", cube_l1_sweep),
        ("biased cube bounds", biased_sweeps),
        ("spectral and log-Sobolev constants", constants),
        ("hypercontractivity", hypercontractivity),
        ("Gaussian L1 bound", gaussian_l1),
        ("Gaussian oracles", gaussian_oracles),
        ("influence scaling", influence_scaling),
        ("commutation and gap bound", commutation_and_gap_bound),
        ("junta extraction", juntas),
        ("noise-form audit", corollary_audit),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
