//! Factored beliefs and exact Bayesian updates.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::MomdpModel;

/// Posterior masses below this are treated as an impossible observation.
pub const ZERO_LIKELIHOOD: f64 = 1e-300;

/// Visible state plus a distribution over hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredBelief {
    pub x: usize,
    pub b_y: Vec<f64>,
}

impl FactoredBelief {
    pub fn new(x: usize, b_y: Vec<f64>) -> Self {
        Self { x, b_y }
    }

    pub fn point(x: usize, y: usize, y_count: usize) -> Self {
        let mut b_y = vec![0.0; y_count];
        b_y[y] = 1.0;
        Self { x, b_y }
    }

    pub fn uniform(x: usize, y_count: usize) -> Self {
        Self {
            x,
            b_y: vec![1.0 / y_count as f64; y_count],
        }
    }

    /// Initial belief of `model` at visible state `x`.
    pub fn initial(model: &MomdpModel, x: usize) -> Self {
        Self {
            x,
            b_y: model.initial_given_x(x).1,
        }
    }

    pub fn mass(&self) -> f64 {
        self.b_y.iter().sum()
    }
}

/// Pushes `b` through the transition model and keeps the mass that lands on
/// `x_next`, unnormalized.
pub fn predict(model: &MomdpModel, b: &FactoredBelief, a: usize, x_next: usize) -> Vec<f64> {
    let mut pred = vec![0.0; model.y_count];
    for (y, &by) in b.b_y.iter().enumerate() {
        if by == 0.0 {
            continue;
        }
        let px = model.t_x_row(b.x, y, a).get(x_next);
        if px == 0.0 {
            continue;
        }
        if let Some(row) = model.t_y_row(b.x, y, a, x_next) {
            let w = by * px;
            for (yn, py) in row.iter() {
                pred[yn] += w * py;
            }
        }
    }
    pred
}

/// Bayes update with an arbitrary likelihood over successor hidden states.
pub fn belief_update_with<F>(
    model: &MomdpModel,
    b: &FactoredBelief,
    a: usize,
    x_next: usize,
    likelihood: F,
) -> Result<FactoredBelief>
where
    F: Fn(usize) -> f64,
{
    let mut post = predict(model, b, a, x_next);
    for (yn, p) in post.iter_mut().enumerate() {
        if *p != 0.0 {
            *p *= likelihood(yn);
        }
    }
    normalize(x_next, post)
}

pub(crate) fn normalize(x: usize, mut post: Vec<f64>) -> Result<FactoredBelief> {
    let mass: f64 = post.iter().sum();
    if !(mass >= ZERO_LIKELIHOOD) {
        return Err(CoreError::ZeroLikelihood { mass });
    }
    for p in post.iter_mut() {
        *p /= mass;
    }
    Ok(FactoredBelief::new(x, post))
}

fn check_ranges(model: &MomdpModel, b: &FactoredBelief, a: usize, x_next: usize) -> Result<()> {
    if a >= model.action_count() {
        return Err(CoreError::OutOfRange(format!("action {a}")));
    }
    if x_next >= model.x_count || b.x >= model.x_count {
        return Err(CoreError::OutOfRange(format!("visible state {x_next}")));
    }
    if b.b_y.len() != model.y_count {
        return Err(CoreError::DimensionMismatch(format!(
            "belief has {} entries, model has {} hidden states",
            b.b_y.len(),
            model.y_count
        )));
    }
    Ok(())
}

/// `b'(y') ∝ O(o | a, x', y') Σ_y T_x(x' | x, y, a) T_y(y' | x, y, a, x') b(y)`.
pub fn belief_update(
    model: &MomdpModel,
    b: &FactoredBelief,
    a: usize,
    x_next: usize,
    o: usize,
) -> Result<FactoredBelief> {
    check_ranges(model, b, a, x_next)?;
    if o >= model.obs_count() {
        return Err(CoreError::OutOfRange(format!("observation {o}")));
    }
    belief_update_with(model, b, a, x_next, |yn| {
        model.obs_row(a, x_next, yn).get(o)
    })
}
