//! Shared Monte Carlo plumbing: seeded shards and covariance estimates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Number of independent RNG streams a sample budget is split across.
pub const SHARDS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Whether `exact` lies within `k` standard errors of the estimate.
    pub fn agrees_with(&self, exact: f64, k: f64) -> bool {
        (self.estimate - exact).abs() <= k * self.stderr + 1e-12
    }
}

/// Draws `samples` pairs `(f(X), f(Y))` across deterministic shards; shard
/// `s` uses stream `s` of the ChaCha generator seeded with `seed`.
pub(crate) fn sample_pairs<F>(samples: usize, seed: u64, draw: F) -> Vec<(f64, f64)>
where
    F: Fn(&mut ChaCha8Rng) -> (f64, f64) + Sync,
{
    let per = samples.div_ceil(SHARDS as usize);
    (0..SHARDS)
        .into_par_iter()
        .flat_map_iter(|shard| {
            let start = shard as usize * per;
            let count = per.min(samples.saturating_sub(start));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            (0..count).map(|_| draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Covariance of paired draws with a delta-method standard error.
pub(crate) fn covariance(pairs: &[(f64, f64)]) -> McEstimate {
    let n = pairs.len();
    if n == 0 {
        return McEstimate { estimate: 0.0, stderr: 0.0, samples: 0 };
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let products: Vec<f64> = pairs.iter().map(|&(x, y)| (x - mx) * (y - my)).collect();
    let estimate = products.iter().sum::<f64>() / nf;
    let var = if n > 1 {
        products.iter().map(|u| (u - estimate).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    McEstimate { estimate, stderr: (var / nf).sqrt(), samples: n }
}
