//! Monte-Carlo policy evaluation and sampling helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{belief_update, FactoredBelief};
use crate::error::Result;
use crate::model::{MomdpModel, SparseRow};
use crate::policy::{greedy_action, AlphaPolicy};

/// Draws an index from `(index, weight)` pairs whose weights sum to ~1.
pub fn sample_pairs<R: Rng + ?Sized>(
    pairs: impl IntoIterator<Item = (usize, f64)>,
    rng: &mut R,
) -> usize {
    let mut u: f64 = rng.gen();
    let mut last = 0;
    for (i, p) in pairs {
        if p <= 0.0 {
            continue;
        }
        last = i;
        if u < p {
            return i;
        }
        u -= p;
    }
    last
}

pub fn sample_row<R: Rng + ?Sized>(row: &SparseRow, rng: &mut R) -> usize {
    sample_pairs(row.iter(), rng)
}

/// Samples `(x', y')` from the joint transition of `(x, y, a)`.
pub fn sample_transition<R: Rng + ?Sized>(
    model: &MomdpModel,
    x: usize,
    y: usize,
    a: usize,
    rng: &mut R,
) -> (usize, usize) {
    let xn = sample_row(model.t_x_row(x, y, a), rng);
    let yn = model
        .t_y_row(x, y, a, xn)
        .map(|row| sample_row(row, rng))
        .unwrap_or(y);
    (xn, yn)
}

/// Samples the initial `(x, y)`.
pub fn sample_initial<R: Rng + ?Sized>(model: &MomdpModel, rng: &mut R) -> (usize, usize) {
    let s = sample_pairs(model.initial.iter().copied().enumerate(), rng);
    model.unflat(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }
}

/// Mean discounted return of greedy rollouts from the initial belief.
pub fn evaluate_policy(
    model: &MomdpModel,
    policy: &AlphaPolicy,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<Estimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes.max(1) {
        let (mut x, mut y) = sample_initial(model, &mut rng);
        let mut b = FactoredBelief::initial(model, x);
        let mut total = 0.0;
        let mut discount = 1.0;
        for _ in 0..horizon {
            if model.is_terminal(x, y) {
                break;
            }
            let a = greedy_action(policy, &b)?;
            total += discount * model.reward(x, y, a);
            discount *= model.discount;
            let (xn, yn) = sample_transition(model, x, y, a, &mut rng);
            let o = sample_row(model.obs_row(a, xn, yn), &mut rng);
            b = belief_update(model, &b, a, xn, o)?;
            x = xn;
            y = yn;
        }
        returns.push(total);
    }
    Ok(Estimate::from_samples(&returns))
}
