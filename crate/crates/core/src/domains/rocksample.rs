//! RockSample(n, k): sense and sample rocks of unknown quality, then exit east.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::AskDynamics;
use crate::error::{CoreError, Result};
use crate::model::{MomdpModel, SparseRow};

pub const RS_NORTH: usize = 0;
pub const RS_SOUTH: usize = 1;
pub const RS_EAST: usize = 2;
pub const RS_WEST: usize = 3;
pub const RS_SAMPLE: usize = 4;
/// Index of `Check_0`; `Check_i` is `RS_CHECK + i`.
pub const RS_CHECK: usize = 5;

pub const OBS_NONE: usize = 0;
pub const OBS_GOOD: usize = 1;
pub const OBS_BAD: usize = 2;

fn default_discount() -> f64 {
    0.95
}

fn default_rock_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RockSampleConfig {
    pub n: usize,
    pub k: usize,
    /// Distance at which sensor efficiency halves.
    pub d0: f64,
    #[serde(default)]
    pub sense_cost: f64,
    #[serde(default = "default_rock_seed")]
    pub rock_seed: u64,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

impl RockSampleConfig {
    pub fn new(n: usize, k: usize, d0: f64, sense_cost: f64) -> Self {
        Self {
            n,
            k,
            d0,
            sense_cost,
            rock_seed: default_rock_seed(),
            discount: default_discount(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RockSample {
    pub config: RockSampleConfig,
    /// `(column, row)` of each rock.
    pub rocks: Vec<(usize, usize)>,
    pub model: MomdpModel,
}

impl RockSample {
    pub fn exit(&self) -> usize {
        self.config.n * self.config.n
    }

    pub fn cell(&self, col: usize, row: usize) -> usize {
        row * self.config.n + col
    }

    /// `(column, row)` of a grid cell; `None` for the exit.
    pub fn coords(&self, x: usize) -> Option<(usize, usize)> {
        (x < self.exit()).then(|| (x % self.config.n, x / self.config.n))
    }

    pub fn start(&self) -> usize {
        self.cell(0, self.config.n / 2)
    }

    pub fn rock_at(&self, x: usize) -> Option<usize> {
        let c = self.coords(x)?;
        self.rocks.iter().position(|&r| r == c)
    }

    /// Probability that `Check_i` from cell `x` reports the true quality.
    pub fn efficiency(&self, x: usize, rock: usize) -> f64 {
        let Some((c, r)) = self.coords(x) else {
            return 0.5;
        };
        let (rc, rr) = self.rocks[rock];
        let d = ((c as f64 - rc as f64).powi(2) + (r as f64 - rr as f64).powi(2)).sqrt();
        sensor_efficiency(d, self.config.d0)
    }

    /// Agent at the start cell, each rock good independently with probability 1/2.
    pub fn reset_trial<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let mut y = 0;
        for i in 0..self.config.k {
            if rng.gen_bool(0.5) {
                y |= 1 << i;
            }
        }
        (self.start(), y)
    }

    /// Asking changes nothing in the environment and yields no sensor reading.
    pub fn ask_dynamics(&self) -> AskDynamics {
        let m = &self.model;
        let mut transition = Vec::with_capacity(m.flat_count());
        for x in 0..m.x_count {
            for y in 0..m.y_count {
                transition.push(vec![(x, y, 1.0)]);
            }
        }
        AskDynamics {
            transition,
            obs: vec![SparseRow::point(OBS_NONE); m.flat_count()],
            reward: vec![0.0; m.flat_count()],
        }
    }
}

/// `0.5 + 0.5 * 2^(-d / d0)`.
pub fn sensor_efficiency(d: f64, d0: f64) -> f64 {
    0.5 + 0.5 * (-d / d0).exp2()
}

pub fn make_rocksample(cfg: &RockSampleConfig) -> Result<RockSample> {
    let (n, k) = (cfg.n, cfg.k);
    if n == 0 || !(cfg.d0 > 0.0) || cfg.sense_cost > 0.0 {
        return Err(CoreError::InvalidSpec(
            "rocksample needs n >= 1, d0 > 0 and sense_cost <= 0".into(),
        ));
    }
    if k > 16 || k + 1 > n * n {
        return Err(CoreError::InvalidSpec(format!(
            "cannot place {k} rocks on a {n}x{n} grid"
        )));
    }
    let start = (n / 2) * n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rock_seed);
    let rocks: Vec<(usize, usize)> = sample(&mut rng, n * n - 1, k)
        .into_iter()
        .map(|i| if i >= start { i + 1 } else { i })
        .map(|x| (x % n, x / n))
        .collect();

    let mut actions: Vec<String> = ["north", "south", "east", "west", "sample"]
        .map(String::from)
        .to_vec();
    actions.extend((0..k).map(|i| format!("check{i}")));
    let na = actions.len();
    let observations = ["none", "good", "bad"].map(String::from).to_vec();
    let ny = 1usize << k;
    let exit = n * n;
    let mut rs = RockSample {
        config: cfg.clone(),
        rocks,
        model: MomdpModel::new(exit + 1, ny, actions, observations, cfg.discount),
    };
    let mut m = rs.model.clone();
    for y in 0..ny {
        let s = m.flat(rs.start(), y);
        m.initial[s] = 1.0 / ny as f64;
    }
    for x in 0..=exit {
        for y in 0..ny {
            if x == exit {
                let s = m.flat(x, y);
                m.terminal[s] = true;
                for a in 0..na {
                    m.set_transition(x, y, a, &[(x, y, 1.0)]);
                }
                continue;
            }
            let (c, r) = (x % n, x / n);
            for a in 0..na {
                let (xn, yn, reward) = match a {
                    RS_NORTH => (if r + 1 < n { x + n } else { x }, y, 0.0),
                    RS_SOUTH => (if r > 0 { x - n } else { x }, y, 0.0),
                    RS_EAST if c + 1 == n => (exit, y, 10.0),
                    RS_EAST => (x + 1, y, 0.0),
                    RS_WEST => (if c > 0 { x - 1 } else { x }, y, 0.0),
                    RS_SAMPLE => match rs.rock_at(x) {
                        Some(i) if y & (1 << i) != 0 => (x, y & !(1 << i), 10.0),
                        _ => (x, y, -10.0),
                    },
                    _ => (x, y, cfg.sense_cost),
                };
                m.set_transition(x, y, a, &[(xn, yn, 1.0)]);
                m.set_reward(x, y, a, reward);
            }
        }
    }
    for a in 0..na {
        for xn in 0..=exit {
            for yn in 0..ny {
                let row = if a >= RS_CHECK && xn != exit {
                    let i = a - RS_CHECK;
                    let eff = rs.efficiency(xn, i);
                    let good = yn & (1 << i) != 0;
                    let (pg, pb) = if good {
                        (eff, 1.0 - eff)
                    } else {
                        (1.0 - eff, eff)
                    };
                    SparseRow::from_pairs([(OBS_GOOD, pg), (OBS_BAD, pb)])
                } else {
                    SparseRow::point(OBS_NONE)
                };
                m.set_obs(a, xn, yn, row);
            }
        }
    }
    rs.model = m;
    Ok(rs)
}
