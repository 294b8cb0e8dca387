//! Alpha-vector policies keyed by visible state.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::FactoredBelief;
use crate::error::{CoreError, Result};
use crate::model::{read_text, write_text};

/// Relative tolerance under which two vector values count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub action: usize,
    pub values: Vec<f64>,
}

impl AlphaVector {
    pub fn dot(&self, b: &[f64]) -> f64 {
        self.values.iter().zip(b).map(|(v, p)| v * p).sum()
    }

    /// Dot product restricted to the listed support of `b`.
    #[inline]
    pub fn dot_support(&self, b: &[f64], support: &[usize]) -> f64 {
        support.iter().map(|&y| self.values[y] * b[y]).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Upper minus lower bound at the initial belief.
    pub precision: f64,
    pub lower: f64,
    pub upper: f64,
    pub backups: usize,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPolicy {
    pub x_count: usize,
    pub y_count: usize,
    pub vectors: Vec<Vec<AlphaVector>>,
    pub stats: SolveStats,
}

impl AlphaPolicy {
    pub fn new(x_count: usize, y_count: usize) -> Self {
        Self {
            x_count,
            y_count,
            vectors: vec![Vec::new(); x_count],
            stats: SolveStats::default(),
        }
    }

    pub fn vector_count(&self) -> usize {
        self.vectors.iter().map(Vec::len).sum()
    }

    /// Index of the maximizing vector at `b`, ties to the lowest action.
    pub fn best_vector(&self, b: &FactoredBelief) -> Result<(usize, f64)> {
        let set = self
            .vectors
            .get(b.x)
            .filter(|v| !v.is_empty())
            .ok_or(CoreError::NoVectors { x: b.x })?;
        let support: Vec<usize> = b
            .b_y
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(i, _)| i)
            .collect();
        let values: Vec<f64> = set
            .iter()
            .map(|v| v.dot_support(&b.b_y, &support))
            .collect();
        let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tol = TIE_TOLERANCE * (1.0 + best.abs());
        let pick = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= best - tol)
            .min_by_key(|(i, _)| set[*i].action)
            .map(|(i, _)| i)
            .expect("non-empty vector set");
        Ok((pick, best))
    }

    /// Value at the point mass on `(x, y)`.
    pub fn point_value(&self, x: usize, y: usize) -> Result<f64> {
        let set = self
            .vectors
            .get(x)
            .filter(|v| !v.is_empty())
            .ok_or(CoreError::NoVectors { x })?;
        Ok(set
            .iter()
            .map(|v| v.values[y])
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(
            path,
            &serde_json::to_string(self).expect("policy serializes"),
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

/// `max_α ⟨α, b_y⟩` over the vectors stored at `b.x`.
pub fn belief_value(policy: &AlphaPolicy, b: &FactoredBelief) -> Result<f64> {
    policy.best_vector(b).map(|(_, v)| v)
}

/// Action tag of the maximizing vector; ties go to the lowest action index.
pub fn greedy_action(policy: &AlphaPolicy, b: &FactoredBelief) -> Result<usize> {
    let (i, _) = policy.best_vector(b)?;
    Ok(policy.vectors[b.x][i].action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn policy(vecs: Vec<(usize, Vec<f64>)>) -> AlphaPolicy {
        let y = vecs[0].1.len();
        let mut p = AlphaPolicy::new(1, y);
        p.vectors[0] = vecs
            .into_iter()
            .map(|(action, values)| AlphaVector { action, values })
            .collect();
        p
    }

    #[test]
    fn zero_vector_has_zero_value() {
        let p = policy(vec![(0, vec![0.0, 0.0])]);
        assert_eq!(
            belief_value(&p, &FactoredBelief::uniform(0, 2)).unwrap(),
            0.0
        );
    }

    #[test]
    fn point_mass_picks_component() {
        let p = policy(vec![(0, vec![1.0, 5.0]), (1, vec![3.0, 2.0])]);
        assert_eq!(
            belief_value(&p, &FactoredBelief::point(0, 0, 2)).unwrap(),
            3.0
        );
        assert_eq!(
            belief_value(&p, &FactoredBelief::point(0, 1, 2)).unwrap(),
            5.0
        );
    }

    #[test]
    fn mixed_belief_matches_enumeration() {
        let p = policy(vec![(0, vec![1.0, 5.0]), (1, vec![3.0, 2.0])]);
        let b = FactoredBelief::new(0, vec![0.7, 0.3]);
        // 0.7 + 1.5 = 2.2 ; 2.1 + 0.6 = 2.7
        assert!((belief_value(&p, &b).unwrap() - 2.7).abs() < 1e-12);
        assert_eq!(greedy_action(&p, &b).unwrap(), 1);
    }

    #[test]
    fn single_vector_action() {
        let p = policy(vec![(2, vec![1.0])]);
        assert_eq!(
            greedy_action(&p, &FactoredBelief::uniform(0, 1)).unwrap(),
            2
        );
    }

    #[test]
    fn identical_vectors_tie_to_lowest_action() {
        let p = policy(vec![(3, vec![1.0, 2.0]), (1, vec![1.0, 2.0])]);
        assert_eq!(
            greedy_action(&p, &FactoredBelief::uniform(0, 2)).unwrap(),
            1
        );
    }

    #[test]
    fn missing_vectors_error() {
        let p = AlphaPolicy::new(2, 1);
        assert!(matches!(
            greedy_action(&p, &FactoredBelief::uniform(1, 1)),
            Err(CoreError::NoVectors { x: 1 })
        ));
    }

    proptest! {
        #[test]
        fn greedy_is_shift_invariant(
            vals in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 3), 1..6),
            shift in -100.0f64..100.0,
            raw in proptest::collection::vec(0.01f64..1.0, 3),
        ) {
            let total: f64 = raw.iter().sum();
            let b = FactoredBelief::new(0, raw.iter().map(|r| r / total).collect());
            let p = policy(vals.iter().cloned().enumerate().collect());
            let shifted = policy(
                vals.iter()
                    .map(|v| v.iter().map(|x| x + shift).collect())
                    .enumerate()
                    .collect(),
            );
            prop_assert_eq!(greedy_action(&p, &b).unwrap(), greedy_action(&shifted, &b).unwrap());
        }
    }
}
