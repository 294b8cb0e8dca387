//! Tabular mixed-observability model.
//!
//! The state factors into a visible coordinate `x` and a hidden coordinate
//! `y`. Transitions are stored as two conditional tables,
//! `p(x' | x, y, a)` and `p(y' | x, y, a, x')`, so that a belief only has to
//! track a distribution over `y`.
//!
//! Index conventions used throughout the crate:
//!
//! ```text
//! (x, y, a)   -> (x * Y + y) * A + a      t_x, t_y, reward
//! (a, x', y') -> (a * X + x') * Y + y'    obs
//! (x, y)      -> x * Y + y                initial, terminal, flat states
//! (x, a)      -> x * A + a                feasibility mask
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Row-sum tolerance for every stochastic table.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// Sparse probability row, sorted by index, no duplicate indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a row from arbitrary `(index, weight)` pairs, merging duplicates
    /// and dropping exact zeros.
    pub fn from_pairs<I: IntoIterator<Item = (usize, f64)>>(pairs: I) -> Self {
        let mut entries: Vec<(usize, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, p) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += p,
                _ => merged.push((i, p)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        Self { entries: merged }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(i, &p)| (i, p))
                .collect(),
        }
    }

    pub fn point(index: usize) -> Self {
        Self {
            entries: vec![(index, 1.0)],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.entries.binary_search_by_key(&index, |e| e.0) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(i, p) in &self.entries {
            out[i] = p;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    TX,
    TY,
    Obs,
    Reward,
    Initial,
    Terminal,
    Discount,
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Table::TX => "t_x",
            Table::TY => "t_y",
            Table::Obs => "obs",
            Table::Reward => "reward",
            Table::Initial => "initial",
            Table::Terminal => "terminal",
            Table::Discount => "discount",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    RowSum,
    NegativeEntry,
    EntryAboveOne,
    IndexOutOfRange,
    MissingRow,
    NonFinite,
    TerminalNotAbsorbing,
    TerminalReward,
    DiscountOutOfRange,
}

/// One broken invariant, located by table and row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub table: Table,
    pub row: Vec<usize>,
    pub kind: ViolationKind,
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{:?}: {:?} (residual {:e})",
            self.table, self.row, self.kind, self.residual
        )
    }
}

#[derive(Debug, Clone)]
pub struct MomdpModel {
    pub x_count: usize,
    pub y_count: usize,
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    pub discount: f64,
    /// `p(x' | x, y, a)`, one row per `(x, y, a)`.
    pub t_x: Vec<SparseRow>,
    /// `p(y' | x, y, a, x')`, per `(x, y, a)` a list of `(x', row)`.
    pub t_y: Vec<Vec<(usize, SparseRow)>>,
    /// `p(o | a, x', y')`, one row per `(a, x', y')`.
    pub obs: Vec<SparseRow>,
    pub reward: Vec<f64>,
    /// Joint initial distribution over `(x, y)`.
    pub initial: Vec<f64>,
    pub terminal: Vec<bool>,
    /// Per `(x, a)`; `false` marks an action that may not be selected at `x`.
    pub feasible: Vec<bool>,
}

impl MomdpModel {
    /// Empty model with all-zero tables; fill it with [`MomdpModel::set_transition`] etc.
    pub fn new(
        x_count: usize,
        y_count: usize,
        actions: Vec<String>,
        observations: Vec<String>,
        discount: f64,
    ) -> Self {
        let a = actions.len();
        Self {
            x_count,
            y_count,
            discount,
            t_x: vec![SparseRow::new(); x_count * y_count * a],
            t_y: vec![Vec::new(); x_count * y_count * a],
            obs: vec![SparseRow::new(); a * x_count * y_count],
            reward: vec![0.0; x_count * y_count * a],
            initial: vec![0.0; x_count * y_count],
            terminal: vec![false; x_count * y_count],
            feasible: vec![true; x_count * a],
            actions,
            observations,
        }
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn obs_count(&self) -> usize {
        self.observations.len()
    }

    pub fn flat_count(&self) -> usize {
        self.x_count * self.y_count
    }

    #[inline]
    pub fn xya(&self, x: usize, y: usize, a: usize) -> usize {
        (x * self.y_count + y) * self.actions.len() + a
    }

    #[inline]
    pub fn axy(&self, a: usize, x: usize, y: usize) -> usize {
        (a * self.x_count + x) * self.y_count + y
    }

    #[inline]
    pub fn flat(&self, x: usize, y: usize) -> usize {
        x * self.y_count + y
    }

    #[inline]
    pub fn unflat(&self, s: usize) -> (usize, usize) {
        (s / self.y_count, s % self.y_count)
    }

    /// Sets the joint successor distribution of `(x, y, a)` from `(x', y', p)`
    /// triples, splitting it into the two conditional tables.
    pub fn set_transition(&mut self, x: usize, y: usize, a: usize, joint: &[(usize, usize, f64)]) {
        let idx = self.xya(x, y, a);
        let tx = SparseRow::from_pairs(joint.iter().map(|&(xn, _, p)| (xn, p)));
        let mut ty = Vec::with_capacity(tx.len());
        for (xn, px) in tx.iter() {
            let row = SparseRow::from_pairs(
                joint
                    .iter()
                    .filter(|e| e.0 == xn)
                    .map(|&(_, yn, p)| (yn, p / px)),
            );
            ty.push((xn, row));
        }
        self.t_x[idx] = tx;
        self.t_y[idx] = ty;
    }

    pub fn set_obs(&mut self, a: usize, xn: usize, yn: usize, row: SparseRow) {
        let idx = self.axy(a, xn, yn);
        self.obs[idx] = row;
    }

    pub fn set_reward(&mut self, x: usize, y: usize, a: usize, r: f64) {
        let idx = self.xya(x, y, a);
        self.reward[idx] = r;
    }

    pub fn reward(&self, x: usize, y: usize, a: usize) -> f64 {
        self.reward[self.xya(x, y, a)]
    }

    pub fn is_terminal(&self, x: usize, y: usize) -> bool {
        self.terminal[self.flat(x, y)]
    }

    pub fn is_feasible(&self, x: usize, a: usize) -> bool {
        self.feasible[x * self.actions.len() + a]
    }

    pub fn t_x_row(&self, x: usize, y: usize, a: usize) -> &SparseRow {
        &self.t_x[self.xya(x, y, a)]
    }

    /// `p(y' | x, y, a, x')`; `None` when `x'` is unreachable.
    pub fn t_y_row(&self, x: usize, y: usize, a: usize, xn: usize) -> Option<&SparseRow> {
        self.t_y[self.xya(x, y, a)]
            .iter()
            .find(|e| e.0 == xn)
            .map(|e| &e.1)
    }

    pub fn obs_row(&self, a: usize, xn: usize, yn: usize) -> &SparseRow {
        &self.obs[self.axy(a, xn, yn)]
    }

    /// Joint successor list `(x', y', p)` of `(x, y, a)`.
    pub fn successors(&self, x: usize, y: usize, a: usize) -> Vec<(usize, usize, f64)> {
        let idx = self.xya(x, y, a);
        let mut out = Vec::new();
        for (xn, px) in self.t_x[idx].iter() {
            if let Some((_, row)) = self.t_y[idx].iter().find(|e| e.0 == xn) {
                for (yn, py) in row.iter() {
                    out.push((xn, yn, px * py));
                }
            }
        }
        out
    }

    /// Initial hidden distribution conditioned on the visible state, with the
    /// marginal probability of `x`.
    pub fn initial_given_x(&self, x: usize) -> (f64, Vec<f64>) {
        let row = &self.initial[x * self.y_count..(x + 1) * self.y_count];
        let mass: f64 = row.iter().sum();
        if mass <= 0.0 {
            return (0.0, vec![0.0; self.y_count]);
        }
        (mass, row.iter().map(|p| p / mass).collect())
    }

    pub fn initial_x_marginal(&self) -> Vec<f64> {
        (0..self.x_count)
            .map(|x| {
                self.initial[x * self.y_count..(x + 1) * self.y_count]
                    .iter()
                    .sum()
            })
            .collect()
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_model(self)
    }

    pub fn flat_view(&self) -> FlatPomdpView<'_> {
        FlatPomdpView { model: self }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&ModelDoc::from_model(self)).expect("model serializes")
    }

    pub fn from_json_str(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        doc.into_model().map_err(serde::de::Error::custom)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        Self::from_json_str(&text).map_err(|source| CoreError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Random model with dense-ish stochastic tables, rewards in `[-1, 1]` and no
/// terminal states. Used by property tests and benchmarks.
pub fn random_model<R: rand::Rng + ?Sized>(
    rng: &mut R,
    x_count: usize,
    y_count: usize,
    action_count: usize,
    obs_count: usize,
    discount: f64,
) -> MomdpModel {
    fn dist<R: rand::Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(0.05..1.0)
                }
            })
            .collect();
        if v.iter().all(|p| *p == 0.0) {
            v[rng.gen_range(0..len)] = 1.0;
        }
        let total: f64 = v.iter().sum();
        v.iter().map(|p| p / total).collect()
    }
    let actions = (0..action_count).map(|a| format!("a{a}")).collect();
    let observations = (0..obs_count).map(|o| format!("o{o}")).collect();
    let mut m = MomdpModel::new(x_count, y_count, actions, observations, discount);
    for x in 0..x_count {
        for y in 0..y_count {
            for a in 0..action_count {
                let px = dist(rng, x_count);
                let mut joint = Vec::new();
                for (xn, &p) in px.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for (yn, q) in dist(rng, y_count).into_iter().enumerate() {
                        if q > 0.0 {
                            joint.push((xn, yn, p * q));
                        }
                    }
                }
                m.set_transition(x, y, a, &joint);
                m.set_reward(x, y, a, rng.gen_range(-1.0..1.0));
            }
        }
    }
    for a in 0..action_count {
        for xn in 0..x_count {
            for yn in 0..y_count {
                m.set_obs(a, xn, yn, SparseRow::from_dense(&dist(rng, obs_count)));
            }
        }
    }
    m.initial = dist(rng, x_count * y_count);
    m
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CoreError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CoreError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_row(
    out: &mut Vec<Violation>,
    table: Table,
    row_index: Vec<usize>,
    row: &SparseRow,
    len: usize,
) {
    for (i, p) in row.iter() {
        if i >= len {
            out.push(Violation {
                table,
                row: row_index.clone(),
                kind: ViolationKind::IndexOutOfRange,
                residual: i as f64,
            });
        }
        if !p.is_finite() {
            out.push(Violation {
                table,
                row: row_index.clone(),
                kind: ViolationKind::NonFinite,
                residual: p,
            });
        } else if p < 0.0 {
            out.push(Violation {
                table,
                row: row_index.clone(),
                kind: ViolationKind::NegativeEntry,
                residual: p,
            });
        } else if p > 1.0 + ROW_TOLERANCE {
            out.push(Violation {
                table,
                row: row_index.clone(),
                kind: ViolationKind::EntryAboveOne,
                residual: p - 1.0,
            });
        }
    }
    let residual = row.sum() - 1.0;
    if residual.abs() > ROW_TOLERANCE {
        out.push(Violation {
            table,
            row: row_index,
            kind: ViolationKind::RowSum,
            residual,
        });
    }
}

/// Checks every structural invariant; an empty result means the model is sound.
pub fn validate_model(model: &MomdpModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let (nx, ny, na, no) = (
        model.x_count,
        model.y_count,
        model.action_count(),
        model.obs_count(),
    );
    if !(0.0..1.0).contains(&model.discount) {
        out.push(Violation {
            table: Table::Discount,
            row: vec![],
            kind: ViolationKind::DiscountOutOfRange,
            residual: model.discount,
        });
    }
    for x in 0..nx {
        for y in 0..ny {
            for a in 0..na {
                let idx = model.xya(x, y, a);
                let tx = &model.t_x[idx];
                check_row(&mut out, Table::TX, vec![x, y, a], tx, nx);
                for (xn, px) in tx.iter() {
                    if px <= 0.0 {
                        continue;
                    }
                    match model.t_y[idx].iter().find(|e| e.0 == xn) {
                        Some((_, row)) => {
                            check_row(&mut out, Table::TY, vec![x, y, a, xn], row, ny)
                        }
                        None => out.push(Violation {
                            table: Table::TY,
                            row: vec![x, y, a, xn],
                            kind: ViolationKind::MissingRow,
                            residual: 1.0,
                        }),
                    }
                }
                let r = model.reward[idx];
                if !r.is_finite() {
                    out.push(Violation {
                        table: Table::Reward,
                        row: vec![x, y, a],
                        kind: ViolationKind::NonFinite,
                        residual: r,
                    });
                }
                if model.terminal[model.flat(x, y)] {
                    if r != 0.0 {
                        out.push(Violation {
                            table: Table::Terminal,
                            row: vec![x, y, a],
                            kind: ViolationKind::TerminalReward,
                            residual: r,
                        });
                    }
                    let stay = tx.get(x)
                        * model
                            .t_y_row(x, y, a, x)
                            .map(|row| row.get(y))
                            .unwrap_or(0.0);
                    if (stay - 1.0).abs() > ROW_TOLERANCE {
                        out.push(Violation {
                            table: Table::Terminal,
                            row: vec![x, y, a],
                            kind: ViolationKind::TerminalNotAbsorbing,
                            residual: stay - 1.0,
                        });
                    }
                }
            }
        }
    }
    for a in 0..na {
        for xn in 0..nx {
            for yn in 0..ny {
                check_row(
                    &mut out,
                    Table::Obs,
                    vec![a, xn, yn],
                    model.obs_row(a, xn, yn),
                    no,
                );
            }
        }
    }
    let initial = SparseRow::from_dense(&model.initial);
    check_row(&mut out, Table::Initial, vec![], &initial, nx * ny);
    out
}

/// Read-only presentation of a model as a flat POMDP over `S = X x Y`.
#[derive(Debug, Clone, Copy)]
pub struct FlatPomdpView<'a> {
    model: &'a MomdpModel,
}

impl<'a> FlatPomdpView<'a> {
    pub fn state_count(&self) -> usize {
        self.model.flat_count()
    }

    pub fn action_count(&self) -> usize {
        self.model.action_count()
    }

    pub fn obs_count(&self) -> usize {
        self.model.obs_count()
    }

    pub fn discount(&self) -> f64 {
        self.model.discount
    }

    /// `T(s, a, .)` as a sparse row over flat states.
    pub fn transition(&self, s: usize, a: usize) -> SparseRow {
        let (x, y) = self.model.unflat(s);
        SparseRow::from_pairs(
            self.model
                .successors(x, y, a)
                .into_iter()
                .map(|(xn, yn, p)| (self.model.flat(xn, yn), p)),
        )
    }

    /// `O(o | a, s')`.
    pub fn observation(&self, a: usize, sn: usize, o: usize) -> f64 {
        let (xn, yn) = self.model.unflat(sn);
        self.model.obs_row(a, xn, yn).get(o)
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        let (x, y) = self.model.unflat(s);
        self.model.reward(x, y, a)
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.model.terminal[s]
    }

    pub fn initial(&self) -> &[f64] {
        &self.model.initial
    }
}

// ---------------------------------------------------------------------------
// JSON document

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RowDoc {
    Dense(Vec<f64>),
    Sparse(Vec<(usize, f64)>),
}

impl RowDoc {
    fn encode(row: &SparseRow, len: usize) -> Self {
        if row.is_empty() {
            RowDoc::Dense(Vec::new())
        } else if row.len() * 2 < len {
            RowDoc::Sparse(row.entries().to_vec())
        } else {
            RowDoc::Dense(row.to_dense(len))
        }
    }

    fn decode(self, len: usize) -> std::result::Result<SparseRow, String> {
        match self {
            RowDoc::Dense(v) if v.is_empty() => Ok(SparseRow::new()),
            RowDoc::Dense(v) => {
                if v.len() != len {
                    return Err(format!("dense row has length {}, expected {len}", v.len()));
                }
                Ok(SparseRow::from_dense(&v))
            }
            RowDoc::Sparse(pairs) => Ok(SparseRow::from_pairs(pairs)),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    x_count: usize,
    y_count: usize,
    actions: Vec<String>,
    observations: Vec<String>,
    discount: f64,
    t_x: Vec<Vec<Vec<RowDoc>>>,
    t_y: Vec<Vec<Vec<Vec<RowDoc>>>>,
    obs: Vec<Vec<Vec<RowDoc>>>,
    reward: Vec<Vec<Vec<f64>>>,
    initial: Vec<Vec<f64>>,
    terminal: Vec<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    infeasible: Vec<(usize, usize)>,
}

fn expect_len<T>(v: &[T], len: usize, what: &str) -> std::result::Result<(), String> {
    if v.len() == len {
        Ok(())
    } else {
        Err(format!("{what}: expected {len} entries, found {}", v.len()))
    }
}

impl ModelDoc {
    fn from_model(m: &MomdpModel) -> Self {
        let (nx, ny, na) = (m.x_count, m.y_count, m.action_count());
        let t_x = (0..nx)
            .map(|x| {
                (0..ny)
                    .map(|y| {
                        (0..na)
                            .map(|a| RowDoc::encode(m.t_x_row(x, y, a), nx))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let t_y = (0..nx)
            .map(|x| {
                (0..ny)
                    .map(|y| {
                        (0..na)
                            .map(|a| {
                                (0..nx)
                                    .map(|xn| match m.t_y_row(x, y, a, xn) {
                                        Some(row) => RowDoc::encode(row, ny),
                                        None => RowDoc::Dense(Vec::new()),
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let obs = (0..na)
            .map(|a| {
                (0..nx)
                    .map(|xn| {
                        (0..ny)
                            .map(|yn| RowDoc::encode(m.obs_row(a, xn, yn), m.obs_count()))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let reward = (0..nx)
            .map(|x| {
                (0..ny)
                    .map(|y| (0..na).map(|a| m.reward(x, y, a)).collect())
                    .collect()
            })
            .collect();
        let initial = (0..nx)
            .map(|x| m.initial[x * ny..(x + 1) * ny].to_vec())
            .collect();
        let terminal = (0..nx)
            .map(|x| m.terminal[x * ny..(x + 1) * ny].to_vec())
            .collect();
        let infeasible = (0..nx)
            .flat_map(|x| (0..na).map(move |a| (x, a)))
            .filter(|&(x, a)| !m.is_feasible(x, a))
            .collect();
        ModelDoc {
            x_count: nx,
            y_count: ny,
            actions: m.actions.clone(),
            observations: m.observations.clone(),
            discount: m.discount,
            t_x,
            t_y,
            obs,
            reward,
            initial,
            terminal,
            infeasible,
        }
    }

    fn into_model(self) -> std::result::Result<MomdpModel, String> {
        let (nx, ny, na) = (self.x_count, self.y_count, self.actions.len());
        let no = self.observations.len();
        let mut m = MomdpModel::new(nx, ny, self.actions, self.observations, self.discount);
        expect_len(&self.t_x, nx, "t_x")?;
        expect_len(&self.t_y, nx, "t_y")?;
        expect_len(&self.obs, na, "obs")?;
        expect_len(&self.reward, nx, "reward")?;
        expect_len(&self.initial, nx, "initial")?;
        expect_len(&self.terminal, nx, "terminal")?;
        for (x, (tx_x, ty_x)) in self.t_x.into_iter().zip(self.t_y).enumerate() {
            expect_len(&tx_x, ny, "t_x[x]")?;
            expect_len(&ty_x, ny, "t_y[x]")?;
            for (y, (tx_y, ty_y)) in tx_x.into_iter().zip(ty_x).enumerate() {
                expect_len(&tx_y, na, "t_x[x][y]")?;
                expect_len(&ty_y, na, "t_y[x][y]")?;
                for (a, (row, ty_a)) in tx_y.into_iter().zip(ty_y).enumerate() {
                    expect_len(&ty_a, nx, "t_y[x][y][a]")?;
                    let idx = m.xya(x, y, a);
                    m.t_x[idx] = row.decode(nx)?;
                    m.t_y[idx] = ty_a
                        .into_iter()
                        .enumerate()
                        .map(|(xn, r)| r.decode(ny).map(|r| (xn, r)))
                        .collect::<std::result::Result<Vec<_>, _>>()?
                        .into_iter()
                        .filter(|(_, r)| !r.is_empty())
                        .collect();
                }
            }
        }
        for (a, per_a) in self.obs.into_iter().enumerate() {
            expect_len(&per_a, nx, "obs[a]")?;
            for (xn, per_x) in per_a.into_iter().enumerate() {
                expect_len(&per_x, ny, "obs[a][x]")?;
                for (yn, row) in per_x.into_iter().enumerate() {
                    let idx = m.axy(a, xn, yn);
                    m.obs[idx] = row.decode(no)?;
                }
            }
        }
        for (x, per_x) in self.reward.into_iter().enumerate() {
            expect_len(&per_x, ny, "reward[x]")?;
            for (y, per_y) in per_x.into_iter().enumerate() {
                expect_len(&per_y, na, "reward[x][y]")?;
                for (a, r) in per_y.into_iter().enumerate() {
                    m.set_reward(x, y, a, r);
                }
            }
        }
        for (x, row) in self.initial.into_iter().enumerate() {
            expect_len(&row, ny, "initial[x]")?;
            m.initial[x * ny..(x + 1) * ny].copy_from_slice(&row);
        }
        for (x, row) in self.terminal.into_iter().enumerate() {
            expect_len(&row, ny, "terminal[x]")?;
            m.terminal[x * ny..(x + 1) * ny].copy_from_slice(&row);
        }
        for (x, a) in self.infeasible {
            if x >= nx || a >= na {
                return Err(format!("infeasible entry ({x}, {a}) out of range"));
            }
            m.feasible[x * na + a] = false;
        }
        Ok(m)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Two visible states, one hidden state, deterministic chain 0 -> 1 -> 1.
    pub(crate) fn chain() -> MomdpModel {
        let mut m = MomdpModel::new(2, 1, vec!["go".into()], vec!["o".into()], 0.9);
        m.set_transition(0, 0, 0, &[(1, 0, 1.0)]);
        m.set_transition(1, 0, 0, &[(1, 0, 1.0)]);
        for x in 0..2 {
            m.set_obs(0, x, 0, SparseRow::point(0));
        }
        m.set_reward(0, 0, 0, 1.0);
        m.initial[0] = 1.0;
        m
    }

    #[test]
    fn well_formed_chain_has_no_violations() {
        assert_eq!(chain().validate(), vec![]);
    }

    #[test]
    fn short_row_is_reported() {
        let mut m = chain();
        let idx = m.xya(0, 0, 0);
        m.t_x[idx] = SparseRow::from_pairs([(1, 0.98)]);
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].table, Table::TX);
        assert_eq!(v[0].row, vec![0, 0, 0]);
        assert_eq!(v[0].kind, ViolationKind::RowSum);
        assert!((v[0].residual + 0.02).abs() < 1e-12);
    }

    #[test]
    fn negative_entry_is_reported() {
        let mut m = chain();
        m.set_obs(0, 1, 0, SparseRow::from_pairs([(0, -0.5)]));
        let v = m.validate();
        assert!(v
            .iter()
            .any(|v| v.kind == ViolationKind::NegativeEntry && v.table == Table::Obs));
    }

    #[test]
    fn terminal_must_absorb() {
        let mut m = chain();
        m.terminal[0] = true;
        let kinds: Vec<_> = m.validate().into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::TerminalNotAbsorbing));
        assert!(kinds.contains(&ViolationKind::TerminalReward));
    }

    #[test]
    fn bad_discount_is_reported() {
        let mut m = chain();
        m.discount = 1.0;
        assert_eq!(m.validate()[0].kind, ViolationKind::DiscountOutOfRange);
    }

    #[test]
    fn json_round_trip_preserves_tables() {
        let mut m = chain();
        m.feasible[1] = false;
        let back = MomdpModel::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(back.t_x, m.t_x);
        assert_eq!(back.t_y, m.t_y);
        assert_eq!(back.obs, m.obs);
        assert_eq!(back.reward, m.reward);
        assert_eq!(back.feasible, m.feasible);
        assert_eq!(back.initial, m.initial);
    }

    #[test]
    fn json_rejects_unknown_fields_and_bad_lengths() {
        let mut v: serde_json::Value = serde_json::from_str(&chain().to_json_string()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(MomdpModel::from_json_str(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&chain().to_json_string()).unwrap();
        v["initial"] = serde_json::json!([[1.0]]);
        assert!(MomdpModel::from_json_str(&v.to_string()).is_err());
    }

    #[test]
    fn dense_and_sparse_rows_decode_alike() {
        let dense: RowDoc = serde_json::from_str("[0.25, 0.0, 0.75]").unwrap();
        let sparse: RowDoc = serde_json::from_str("[[0, 0.25], [2, 0.75]]").unwrap();
        assert_eq!(dense.decode(3).unwrap(), sparse.decode(3).unwrap());
    }

    #[test]
    fn flat_view_rows_are_stochastic() {
        let m = chain();
        let view = m.flat_view();
        for s in 0..view.state_count() {
            assert!((view.transition(s, 0).sum() - 1.0).abs() < 1e-12);
        }
        assert_eq!(view.reward(0, 0), 1.0);
    }
}
