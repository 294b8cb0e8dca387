//! Suggester models: noisy-rational suggestion likelihoods, discrete type
//! sets with uniform switching dynamics, true-quality schedules, and the
//! wall-sensor heuristic for Tag.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domains::tag::{TagGrid, TAG_EAST, TAG_NORTH, TAG_WEST};
use crate::error::{CoreError, Result};
use crate::evaluate::sample_pairs;
use crate::qtable::QTable;

/// Hypothesized suggester types, their switching probability and prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggesterSpec {
    /// Rationality coefficients, strictly increasing.
    pub types: Vec<f64>,
    pub t_p: f64,
    pub prior: Vec<f64>,
}

impl SuggesterSpec {
    pub fn new(types: Vec<f64>, t_p: f64, prior: Vec<f64>) -> Result<Self> {
        let spec = Self { types, t_p, prior };
        spec.validate()?;
        Ok(spec)
    }

    /// A single known coefficient with static dynamics.
    pub fn fixed(lambda: f64) -> Self {
        Self {
            types: vec![lambda],
            t_p: 0.0,
            prior: vec![1.0],
        }
    }

    pub fn uniform_prior(types: Vec<f64>, t_p: f64) -> Result<Self> {
        let n = types.len();
        Self::new(types, t_p, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.types.is_empty() {
            return Err(CoreError::InvalidSpec("type set is empty".into()));
        }
        if self.types.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(CoreError::InvalidSpec(
                "types must be finite and >= 0".into(),
            ));
        }
        if self.types.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::InvalidSpec(
                "types must be strictly increasing".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.t_p) {
            return Err(CoreError::InvalidSpec(format!(
                "t_p = {} outside [0, 1]",
                self.t_p
            )));
        }
        if self.prior.len() != self.types.len() {
            return Err(CoreError::InvalidSpec(
                "prior and types differ in length".into(),
            ));
        }
        if self.prior.iter().any(|&p| !(0.0..=1.0).contains(&p))
            || (self.prior.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(CoreError::InvalidSpec("prior is not a distribution".into()));
        }
        if self.t_p > 0.0 && self.types.len() < 2 {
            return Err(CoreError::SingleTypeDynamic { t_p: self.t_p });
        }
        Ok(())
    }

    /// `Σ λ̂ P(λ̂)` for a distribution over this type set.
    pub fn expectation(&self, marginal: &[f64]) -> f64 {
        self.types.iter().zip(marginal).map(|(l, p)| l * p).sum()
    }
}

/// True suggester coefficient per trial: half-open segments `[from_trial, next)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LambdaSchedule {
    pub segments: Vec<ScheduleSegment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSegment {
    pub from_trial: usize,
    pub lambda: f64,
}

impl LambdaSchedule {
    pub fn constant(lambda: f64) -> Self {
        Self {
            segments: vec![ScheduleSegment {
                from_trial: 0,
                lambda,
            }],
        }
    }

    /// Equal-length segments, one per listed coefficient.
    pub fn stepped(lambdas: &[f64], trials_per_segment: usize) -> Self {
        Self {
            segments: lambdas
                .iter()
                .enumerate()
                .map(|(i, &lambda)| ScheduleSegment {
                    from_trial: i * trials_per_segment,
                    lambda,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(CoreError::InvalidSpec("schedule is empty".into()));
        }
        if self
            .segments
            .windows(2)
            .any(|w| w[1].from_trial <= w[0].from_trial)
        {
            return Err(CoreError::InvalidSpec(
                "schedule thresholds must increase".into(),
            ));
        }
        if self.segments.iter().any(|s| !(s.lambda >= 0.0)) {
            return Err(CoreError::InvalidSpec(
                "schedule coefficients must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Coefficient of the segment active at `trial_index`.
pub fn lambda_at(schedule: &LambdaSchedule, trial_index: usize) -> f64 {
    schedule
        .segments
        .iter()
        .rev()
        .find(|s| s.from_trial <= trial_index)
        .or_else(|| schedule.segments.first())
        .map(|s| s.lambda)
        .unwrap_or(0.0)
}

/// An action recommendation, or nothing this step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Suggestion {
    Action(usize),
    #[default]
    Absent,
}

impl Suggestion {
    pub fn action(&self) -> Option<usize> {
        match self {
            Suggestion::Action(a) => Some(*a),
            Suggestion::Absent => None,
        }
    }
}

impl fmt::Display for Suggestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Suggestion::Action(a) => write!(f, "{a}"),
            Suggestion::Absent => f.write_str("none"),
        }
    }
}

impl Serialize for Suggestion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Suggestion::Action(a) => s.serialize_u64(*a as u64),
            Suggestion::Absent => s.serialize_str("none"),
        }
    }
}

impl<'de> Deserialize<'de> for Suggestion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(Suggestion::Action(i as usize)),
            Raw::Word(w) if w == "none" => Ok(Suggestion::Absent),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected an action index or \"none\", got {w:?}"
            ))),
        }
    }
}

/// Boltzmann distribution `∝ exp(λ q)`, computed with max subtraction.
pub fn softmax(q: &[f64], lambda: f64) -> Vec<f64> {
    let scaled: Vec<f64> = q.iter().map(|v| lambda * v).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scaled.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in out.iter_mut() {
        *p /= total;
    }
    out
}

/// `p(σ | s, λ) ∝ exp(λ Q(s, σ))` over the actions of `q`; the optional
/// `ask` index is given zero probability.
pub fn suggestion_distribution(q: &QTable, s: usize, lambda: f64, ask: Option<usize>) -> Vec<f64> {
    let row = q.row(s);
    match ask {
        None => softmax(row, lambda),
        Some(k) => {
            let kept: Vec<f64> = row
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, v)| *v)
                .collect();
            let mut p = softmax(&kept, lambda);
            if k <= p.len() {
                p.insert(k, 0.0);
            }
            p
        }
    }
}

pub fn sample_suggestion<R: Rng + ?Sized>(
    q: &QTable,
    s: usize,
    lambda_true: f64,
    rng: &mut R,
) -> Suggestion {
    let p = suggestion_distribution(q, s, lambda_true, None);
    Suggestion::Action(sample_pairs(p.into_iter().enumerate(), rng))
}

/// Uniform switching: stay with `1 - t_p`, move to each other type with
/// `t_p / (m - 1)`.
pub fn type_transition_matrix(spec: &SuggesterSpec) -> Result<Vec<Vec<f64>>> {
    let m = spec.types.len();
    if spec.t_p > 0.0 && m < 2 {
        return Err(CoreError::SingleTypeDynamic { t_p: spec.t_p });
    }
    let off = if m > 1 {
        spec.t_p / (m - 1) as f64
    } else {
        0.0
    };
    Ok((0..m)
        .map(|i| {
            (0..m)
                .map(|j| if i == j { 1.0 - spec.t_p } else { off })
                .collect()
        })
        .collect())
}

const MIXING_STEP_LIMIT: usize = 1_000_000;

/// Smallest `t` with `max_i TV(δ_i P^t, uniform) < tv_target`.
pub fn mixing_steps(spec: &SuggesterSpec, tv_target: f64) -> Result<usize> {
    if spec.t_p <= 0.0 {
        return Err(CoreError::NoMixing);
    }
    if !(tv_target > 0.0 && tv_target < 1.0) {
        return Err(CoreError::InvalidSpec(format!(
            "tv_target {tv_target} outside (0, 1)"
        )));
    }
    let p = type_transition_matrix(spec)?;
    let m = p.len();
    let uniform = 1.0 / m as f64;
    let mut rows: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for t in 0..=MIXING_STEP_LIMIT {
        let worst = rows
            .iter()
            .map(|r| 0.5 * r.iter().map(|v| (v - uniform).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if worst < tv_target {
            return Ok(t);
        }
        rows = rows
            .iter()
            .map(|r| {
                (0..m)
                    .map(|j| (0..m).map(|k| r[k] * p[k][j]).sum())
                    .collect()
            })
            .collect();
    }
    Err(CoreError::NoMixing)
}

/// Wall-sensor suggester: points toward the north, west or east wall when the
/// opponent sits in that wall's two-cell band and the agent does not.
/// Overlapping bands resolve north, then west, then east.
pub fn heuristic_suggest(
    grid: &TagGrid,
    agent_cell: usize,
    opponent_cell: Option<usize>,
) -> Suggestion {
    const BAND: usize = 2;
    let Some(opp) = opponent_cell else {
        return Suggestion::Absent;
    };
    let (ac, ar) = grid.coords(agent_cell);
    let (oc, or) = grid.coords(opp);
    let north = |r: usize| r + BAND >= grid.height;
    let west = |c: usize| c < BAND;
    let east = |c: usize| c + BAND >= grid.width;
    if north(or) && !north(ar) {
        Suggestion::Action(TAG_NORTH)
    } else if west(oc) && !west(ac) {
        Suggestion::Action(TAG_WEST)
    } else if east(oc) && !east(ac) {
        Suggestion::Action(TAG_EAST)
    } else {
        Suggestion::Absent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(values: &[f64]) -> QTable {
        QTable {
            rows: 1,
            cols: values.len(),
            x_count: 1,
            y_count: 1,
            values: values.to_vec(),
        }
    }

    #[test]
    fn softmax_matches_worked_example() {
        let t = q(&[5.0, 4.0, 3.0]);
        for p in suggestion_distribution(&t, 0, 0.0, None) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = suggestion_distribution(&t, 0, 1.0, None);
        for (got, want) in p.iter().zip([0.67, 0.24, 0.09]) {
            assert!((got - want).abs() < 0.005, "{p:?}");
        }
    }

    #[test]
    fn softmax_lambda_five_frozen() {
        // e^0, e^-5, e^-10 normalized, evaluated independently
        let z = 1.0 + (-5.0f64).exp() + (-10.0f64).exp();
        let want = [1.0 / z, (-5.0f64).exp() / z, (-10.0f64).exp() / z];
        let p = suggestion_distribution(&q(&[5.0, 4.0, 3.0]), 0, 5.0, None);
        for (got, w) in p.iter().zip(want) {
            assert!((got - w).abs() < 1e-15);
        }
        assert!((p[0] - 0.99326).abs() < 1e-5);
        assert!((p[1] - 0.00669).abs() < 1e-5);
        assert!((p[2] - 0.0000451).abs() < 1e-7);
    }

    #[test]
    fn huge_lambda_does_not_overflow() {
        let p = suggestion_distribution(&q(&[5.0, 4.0, 3.0]), 0, 1e6, None);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn ask_action_excluded_from_support() {
        let p = suggestion_distribution(&q(&[1.0, 9.0, 1.0]), 0, 1.0, Some(1));
        assert_eq!(p[1], 0.0);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn type_matrix_cases() {
        let id = type_transition_matrix(
            &SuggesterSpec::uniform_prior(vec![0.0, 1.0, 2.0], 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(id[1], vec![0.0, 1.0, 0.0]);
        let spec = SuggesterSpec::uniform_prior(vec![0.0, 1.0, 2.0, 5.0, 10.0], 0.05).unwrap();
        let m = type_transition_matrix(&spec).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 0.95 } else { 0.0125 };
                assert!((m[i][j] - want).abs() < 1e-15);
            }
        }
        // uniform is stationary
        for j in 0..5 {
            let col: f64 = (0..5).map(|i| 0.2 * m[i][j]).sum();
            assert!((col - 0.2).abs() < 1e-15);
        }
        let single = SuggesterSpec {
            types: vec![1.0],
            t_p: 0.1,
            prior: vec![1.0],
        };
        assert!(matches!(
            type_transition_matrix(&single),
            Err(CoreError::SingleTypeDynamic { .. })
        ));
    }

    #[test]
    fn mixing_time_for_five_types() {
        let spec = SuggesterSpec::uniform_prior(vec![0.0, 1.0, 2.0, 5.0, 10.0], 0.05).unwrap();
        assert_eq!(mixing_steps(&spec, 0.1).unwrap(), 33);
        // spectral closed form: TV_t = (1 - 1/m) * (1 - t_p m / (m - 1))^t
        let lambda2: f64 = 1.0 - 0.05 * 5.0 / 4.0;
        assert!(0.8 * lambda2.powi(33) < 0.1);
        assert!(0.8 * lambda2.powi(32) >= 0.1);
    }

    #[test]
    fn two_type_half_switch_mixes_in_one_step() {
        let spec = SuggesterSpec::uniform_prior(vec![0.0, 1.0], 0.5).unwrap();
        assert_eq!(mixing_steps(&spec, 0.1).unwrap(), 1);
        let frozen = SuggesterSpec::uniform_prior(vec![0.0, 1.0], 0.0).unwrap();
        assert!(matches!(
            mixing_steps(&frozen, 0.1),
            Err(CoreError::NoMixing)
        ));
    }

    #[test]
    fn sampling_near_deterministic_limit() {
        let t = q(&[1.0, 3.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hits = (0..10_000)
            .filter(|_| sample_suggestion(&t, 0, 1e6, &mut rng) == Suggestion::Action(1))
            .count();
        assert!(hits as f64 / 1e4 >= 0.999);
    }

    fn check_frequencies(lambda: f64, draws: usize, seed: u64) {
        let t = q(&[5.0, 4.0, 3.0]);
        let p = suggestion_distribution(&t, 0, lambda, None);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[sample_suggestion(&t, 0, lambda, &mut rng).action().unwrap()] += 1;
        }
        for k in 0..3 {
            let f = counts[k] as f64 / draws as f64;
            let sigma = (p[k] * (1.0 - p[k]) / draws as f64).sqrt();
            assert!(
                (f - p[k]).abs() <= 3.0 * sigma,
                "action {k}: {f} vs {}",
                p[k]
            );
        }
    }

    #[test]
    fn sampling_uniform_at_zero() {
        check_frequencies(0.0, 100_000, 2);
    }

    #[test]
    fn sampling_matches_distribution_at_one() {
        check_frequencies(1.0, 100_000, 3);
    }

    #[test]
    fn schedule_lookup() {
        assert_eq!(lambda_at(&LambdaSchedule::constant(2.0), 1234), 2.0);
        let s = LambdaSchedule::stepped(&[5.0, 3.0, 1.0, 0.0, 10.0], 20);
        assert_eq!(lambda_at(&s, 500), 10.0);
        assert_eq!(lambda_at(&s, 19), 5.0);
        assert_eq!(lambda_at(&s, 20), 3.0);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn heuristic_cases() {
        let g = TagGrid::standard();
        let cell = |c, r| g.index(c, r).unwrap();
        // opponent against the west wall, agent in the middle of the bottom rows
        assert_eq!(
            heuristic_suggest(&g, cell(5, 0), Some(cell(0, 1))),
            Suggestion::Action(TAG_WEST)
        );
        // opponent in the interior
        assert_eq!(
            heuristic_suggest(&g, cell(0, 0), Some(cell(4, 1))),
            Suggestion::Absent
        );
        // both inside the west band
        assert_eq!(
            heuristic_suggest(&g, cell(1, 0), Some(cell(0, 1))),
            Suggestion::Absent
        );
        // north band has precedence; east band otherwise
        assert_eq!(
            heuristic_suggest(&g, cell(5, 0), Some(cell(6, 4))),
            Suggestion::Action(TAG_NORTH)
        );
        assert_eq!(
            heuristic_suggest(&g, cell(5, 0), Some(cell(9, 0))),
            Suggestion::Action(TAG_EAST)
        );
        assert_eq!(heuristic_suggest(&g, cell(5, 0), None), Suggestion::Absent);
    }

    #[test]
    fn suggestion_serde() {
        assert_eq!(serde_json::to_string(&Suggestion::Action(2)).unwrap(), "2");
        assert_eq!(
            serde_json::to_string(&Suggestion::Absent).unwrap(),
            "\"none\""
        );
        assert_eq!(
            serde_json::from_str::<Suggestion>("\"none\"").unwrap(),
            Suggestion::Absent
        );
        assert!(serde_json::from_str::<Suggestion>("\"west\"").is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(SuggesterSpec::new(vec![1.0, 0.0], 0.0, vec![0.5, 0.5]).is_err());
        assert!(SuggesterSpec::new(vec![0.0, 1.0], 0.0, vec![0.5, 0.6]).is_err());
        assert!(SuggesterSpec::new(
            vec![0.0, 1.0, 2.0, 5.0, 10.0],
            0.0,
            vec![0.1, 0.2, 0.4, 0.2, 0.1]
        )
        .is_ok());
    }

    proptest! {
        #[test]
        fn distribution_normalized_and_shift_invariant(
            row in proptest::collection::vec(-20.0f64..20.0, 2..8),
            lambda in 0.0f64..20.0,
            shift in -50.0f64..50.0,
        ) {
            let p = suggestion_distribution(&q(&row), 0, lambda, None);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();
            let ps = suggestion_distribution(&q(&shifted), 0, lambda, None);
            for (a, b) in p.iter().zip(&ps) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn argmax_probability_monotone_in_lambda(
            row in proptest::collection::vec(-20.0f64..20.0, 2..8),
            l1 in 0.0f64..10.0,
            dl in 0.01f64..10.0,
        ) {
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let k = row.iter().position(|&v| v == best).unwrap();
            let p1 = suggestion_distribution(&q(&row), 0, l1, None)[k];
            let p2 = suggestion_distribution(&q(&row), 0, l1 + dl, None)[k];
            prop_assert!(p2 >= p1 - 1e-12);
        }

        #[test]
        fn type_matrix_doubly_stochastic(m in 2usize..8, t_p in 0.0f64..1.0) {
            let spec = SuggesterSpec::uniform_prior((0..m).map(|i| i as f64).collect(), t_p).unwrap();
            let p = type_transition_matrix(&spec).unwrap();
            for i in 0..m {
                prop_assert!((p[i].iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(((0..m).map(|k| p[k][i]).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
