//! Tag: chase an evasive opponent on a 29-cell grid.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::AskDynamics;
use crate::error::{CoreError, Result};
use crate::model::{MomdpModel, SparseRow};

pub const TAG_NORTH: usize = 0;
pub const TAG_SOUTH: usize = 1;
pub const TAG_EAST: usize = 2;
pub const TAG_WEST: usize = 3;
pub const TAG_TAG: usize = 4;

pub const OBS_UNSEEN: usize = 0;
pub const OBS_SEEN: usize = 1;

fn default_p_move() -> f64 {
    0.8
}

fn default_discount() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagConfig {
    /// Probability that the opponent tries to move away each step.
    #[serde(default = "default_p_move")]
    pub p_move: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

impl Default for TagConfig {
    fn default() -> Self {
        Self {
            p_move: default_p_move(),
            discount: default_discount(),
        }
    }
}

/// Cell geometry. Row 0 is the southern edge; columns grow eastward.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagGrid {
    pub width: usize,
    pub height: usize,
    cells: Vec<(usize, usize)>,
    #[serde(skip)]
    lookup: Vec<Option<usize>>,
}

impl TagGrid {
    /// Two full 10-cell rows with a 3-column block on top of columns 5..=7.
    pub fn standard() -> Self {
        let (width, height) = (10, 5);
        let mut cells = Vec::new();
        for row in 0..height {
            for col in 0..width {
                if row < 2 || (5..=7).contains(&col) {
                    cells.push((col, row));
                }
            }
        }
        let mut lookup = vec![None; width * height];
        for (i, &(c, r)) in cells.iter().enumerate() {
            lookup[r * width + c] = Some(i);
        }
        Self {
            width,
            height,
            cells,
            lookup,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// `(column, row)` of a cell.
    pub fn coords(&self, cell: usize) -> (usize, usize) {
        self.cells[cell]
    }

    pub fn index(&self, col: usize, row: usize) -> Option<usize> {
        if col >= self.width || row >= self.height {
            return None;
        }
        self.lookup[row * self.width + col]
    }

    /// Destination of a compass move; blocked moves stay put.
    pub fn step(&self, cell: usize, dir: usize) -> usize {
        let (c, r) = self.cells[cell];
        let target = match dir {
            TAG_NORTH => self.index(c, r + 1),
            TAG_SOUTH if r > 0 => self.index(c, r - 1),
            TAG_EAST => self.index(c + 1, r),
            TAG_WEST if c > 0 => self.index(c - 1, r),
            _ => None,
        };
        target.unwrap_or(cell)
    }

    /// Opponent successor distribution when fleeing an agent at `agent`.
    pub fn evade(&self, opponent: usize, agent: usize, p_move: f64) -> Vec<(usize, f64)> {
        let (oc, or) = self.cells[opponent];
        let (ac, ar) = self.cells[agent];
        let half = p_move / 2.0;
        let mut out = vec![(opponent, 1.0 - p_move)];
        let horizontal: &[usize] = match oc.cmp(&ac) {
            std::cmp::Ordering::Greater => &[TAG_EAST],
            std::cmp::Ordering::Less => &[TAG_WEST],
            std::cmp::Ordering::Equal => &[TAG_EAST, TAG_WEST],
        };
        let vertical: &[usize] = match or.cmp(&ar) {
            std::cmp::Ordering::Greater => &[TAG_NORTH],
            std::cmp::Ordering::Less => &[TAG_SOUTH],
            std::cmp::Ordering::Equal => &[TAG_NORTH, TAG_SOUTH],
        };
        for dirs in [horizontal, vertical] {
            let share = half / dirs.len() as f64;
            for &d in dirs {
                out.push((self.step(opponent, d), share));
            }
        }
        out
    }
}

/// Generated Tag model. Hidden index `cell_count()` is the tagged flag.
#[derive(Debug, Clone)]
pub struct Tag {
    pub config: TagConfig,
    pub grid: TagGrid,
    pub model: MomdpModel,
}

impl Tag {
    pub fn tagged(&self) -> usize {
        self.grid.cell_count()
    }

    /// Agent and opponent on distinct uniformly drawn cells.
    pub fn reset_trial<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let n = self.grid.cell_count();
        let agent = rng.gen_range(0..n);
        let mut opponent = rng.gen_range(0..n - 1);
        if opponent >= agent {
            opponent += 1;
        }
        (agent, opponent)
    }

    /// Asking leaves the agent in place while the opponent keeps evading.
    pub fn ask_dynamics(&self) -> AskDynamics {
        let m = &self.model;
        let tagged = self.tagged();
        let mut transition = Vec::with_capacity(m.flat_count());
        let mut obs = Vec::with_capacity(m.flat_count());
        for x in 0..m.x_count {
            for y in 0..m.y_count {
                if y == tagged {
                    transition.push(vec![(x, y, 1.0)]);
                } else {
                    transition.push(
                        self.grid
                            .evade(y, x, self.config.p_move)
                            .into_iter()
                            .map(|(yn, p)| (x, yn, p))
                            .collect(),
                    );
                }
                obs.push(SparseRow::point(sight(x, y)));
            }
        }
        AskDynamics {
            transition,
            obs,
            reward: vec![0.0; m.flat_count()],
        }
    }
}

fn sight(agent: usize, opponent: usize) -> usize {
    if agent == opponent {
        OBS_SEEN
    } else {
        OBS_UNSEEN
    }
}

pub fn make_tag(cfg: &TagConfig) -> Result<Tag> {
    if !(0.0..=1.0).contains(&cfg.p_move) {
        return Err(CoreError::InvalidSpec(format!(
            "p_move {} outside [0, 1]",
            cfg.p_move
        )));
    }
    let grid = TagGrid::standard();
    let n = grid.cell_count();
    let tagged = n;
    let actions = ["north", "south", "east", "west", "tag"]
        .map(String::from)
        .to_vec();
    let observations = ["unseen", "seen"].map(String::from).to_vec();
    let mut m = MomdpModel::new(n, n + 1, actions, observations, cfg.discount);

    for x in 0..n {
        for y in 0..=n {
            let s = m.flat(x, y);
            if y == tagged {
                m.terminal[s] = true;
                for a in 0..5 {
                    m.set_transition(x, y, a, &[(x, y, 1.0)]);
                }
                continue;
            }
            m.initial[s] = if x != y {
                1.0 / (n * (n - 1)) as f64
            } else {
                0.0
            };
            let fled = grid.evade(y, x, cfg.p_move);
            for a in 0..5 {
                if a == TAG_TAG && x == y {
                    m.set_transition(x, y, a, &[(x, tagged, 1.0)]);
                    m.set_reward(x, y, a, 10.0);
                    continue;
                }
                let xn = if a == TAG_TAG { x } else { grid.step(x, a) };
                let joint: Vec<_> = fled.iter().map(|&(yn, p)| (xn, yn, p)).collect();
                m.set_transition(x, y, a, &joint);
                m.set_reward(x, y, a, if a == TAG_TAG { -10.0 } else { -1.0 });
            }
        }
    }
    for a in 0..5 {
        for xn in 0..n {
            for yn in 0..=n {
                let o = if yn == tagged {
                    OBS_UNSEEN
                } else {
                    sight(xn, yn)
                };
                m.set_obs(a, xn, yn, SparseRow::point(o));
            }
        }
    }
    Ok(Tag {
        config: cfg.clone(),
        grid,
        model: m,
    })
}
