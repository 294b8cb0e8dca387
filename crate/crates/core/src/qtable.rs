//! State-action values on the flat state space, used to parameterize the
//! noisy-rational suggestion model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{read_text, write_text, MomdpModel};
use crate::policy::AlphaPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    /// Number of flat states, `x_count * y_count`.
    pub rows: usize,
    /// Number of actions.
    pub cols: usize,
    pub x_count: usize,
    pub y_count: usize,
    /// Row-major `rows x cols`.
    pub values: Vec<f64>,
}

impl QTable {
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.cols..(s + 1) * self.cols]
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.cols + a]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(
            path,
            &serde_json::to_string(self).expect("q table serializes"),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|source| CoreError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}

/// `Q(s, a) = R(s, a) + γ Σ_{s'} T(s, a, s') V(s')`, with `V` the lower-bound
/// value at the point mass on `s'`.
pub fn extract_q(model: &MomdpModel, policy: &AlphaPolicy) -> Result<QTable> {
    if policy.x_count != model.x_count || policy.y_count != model.y_count {
        return Err(CoreError::DimensionMismatch(format!(
            "policy is {}x{}, model is {}x{}",
            policy.x_count, policy.y_count, model.x_count, model.y_count
        )));
    }
    let view = model.flat_view();
    let (ns, na) = (view.state_count(), view.action_count());
    let mut point = vec![0.0; ns];
    for (s, slot) in point.iter_mut().enumerate() {
        let (x, y) = model.unflat(s);
        *slot = if model.terminal[s] {
            0.0
        } else {
            policy.point_value(x, y)?
        };
    }
    let mut values = vec![0.0; ns * na];
    for s in 0..ns {
        if view.is_terminal(s) {
            continue;
        }
        for a in 0..na {
            let future: f64 = view
                .transition(s, a)
                .iter()
                .map(|(sn, p)| p * point[sn])
                .sum();
            values[s * na + a] = view.reward(s, a) + view.discount() * future;
        }
    }
    Ok(QTable {
        rows: ns,
        cols: na,
        x_count: model.x_count,
        y_count: model.y_count,
        values,
    })
}
