//! Anytime point-based solver.
//!
//! Lower bound: alpha vectors per visible state, seeded with fixed-action
//! policies. Upper bound: fast informed bound combined with a sawtooth point
//! set. Beliefs are sampled along trajectories that chase the largest
//! weighted bound gap, and both bounds are backed up on the way back.

mod bounds;
mod dynamics;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::MomdpModel;
use crate::policy::{AlphaPolicy, AlphaVector, SolveStats};

pub(crate) use dynamics::Dynamics;

/// Bounds may cross by at most this much before the solver gives up.
pub const CROSSING_TOLERANCE: f64 = 1e-6;

const MAX_DEPTH: usize = 400;
const GAP_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveParams {
    /// Target upper-minus-lower gap at the initial belief.
    pub target_precision: f64,
    /// Wall-clock budget in seconds.
    pub time_budget: f64,
    pub max_backups: usize,
    pub rng_seed: u64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            target_precision: 1e-2,
            time_budget: 300.0,
            max_backups: usize::MAX,
            rng_seed: 0,
        }
    }
}

impl SolveParams {
    pub fn with_budget(target_precision: f64, time_budget: f64) -> Self {
        Self {
            target_precision,
            time_budget,
            ..Self::default()
        }
    }
}

struct StoredBelief {
    support: Vec<usize>,
    probs: Vec<f64>,
    /// Upper-bound value recorded at this belief.
    value: f64,
    corner_dot: f64,
}

struct UpperBound {
    ny: usize,
    na: usize,
    corner: Vec<f64>,
    fib: Vec<f64>,
    points: Vec<Vec<StoredBelief>>,
    index: HashMap<(usize, u64), usize>,
}

fn belief_key(support: &[usize], b: &[f64]) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for &y in support {
        y.hash(&mut h);
        b[y].to_bits().hash(&mut h);
    }
    h.finish()
}

impl UpperBound {
    fn new(d: &Dynamics, fib: Vec<f64>) -> Self {
        let mut corner = vec![0.0; d.nx * d.ny];
        for x in 0..d.nx {
            for y in 0..d.ny {
                corner[x * d.ny + y] = if d.terminal(x, y) {
                    0.0
                } else {
                    d.feasible_actions(x)
                        .map(|a| fib[(x * d.na + a) * d.ny + y])
                        .fold(f64::NEG_INFINITY, f64::max)
                };
            }
        }
        Self {
            ny: d.ny,
            na: d.na,
            corner,
            fib,
            points: (0..d.nx).map(|_| Vec::new()).collect(),
            index: HashMap::new(),
        }
    }

    fn value(&self, d: &Dynamics, x: usize, b: &[f64], support: &[usize]) -> f64 {
        let corner = &self.corner[x * self.ny..(x + 1) * self.ny];
        let cb: f64 = support.iter().map(|&y| b[y] * corner[y]).sum();
        let mut fibv = f64::NEG_INFINITY;
        for a in d.feasible_actions(x) {
            let q = &self.fib[(x * self.na + a) * self.ny..(x * self.na + a + 1) * self.ny];
            let v: f64 = support.iter().map(|&y| b[y] * q[y]).sum();
            fibv = fibv.max(v);
        }
        let mut best = cb.min(fibv);
        for pt in &self.points[x] {
            let gain = pt.value - pt.corner_dot;
            if gain >= 0.0 {
                continue;
            }
            let mut ratio = f64::INFINITY;
            for (&y, &py) in pt.support.iter().zip(&pt.probs) {
                let r = b[y] / py;
                if r < ratio {
                    ratio = r;
                    if ratio == 0.0 {
                        break;
                    }
                }
            }
            if ratio > 0.0 {
                best = best.min(cb + ratio * gain);
            }
        }
        best
    }

    fn update(&mut self, x: usize, b: &[f64], support: &[usize], value: f64) {
        if support.len() == 1 {
            let y = support[0];
            let i = x * self.ny + y;
            if value < self.corner[i] {
                self.corner[i] = value;
                let corner = &self.corner[x * self.ny..(x + 1) * self.ny];
                for pt in self.points[x].iter_mut() {
                    pt.corner_dot = pt
                        .support
                        .iter()
                        .zip(&pt.probs)
                        .map(|(&y, &p)| p * corner[y])
                        .sum();
                }
            }
            return;
        }
        let key = (x, belief_key(support, b));
        if let Some(&i) = self.index.get(&key) {
            let pt = &mut self.points[x][i];
            pt.value = pt.value.min(value);
            return;
        }
        let corner = &self.corner[x * self.ny..(x + 1) * self.ny];
        let probs: Vec<f64> = support.iter().map(|&y| b[y]).collect();
        let corner_dot = support
            .iter()
            .zip(&probs)
            .map(|(&y, &p)| p * corner[y])
            .sum();
        self.index.insert(key, self.points[x].len());
        self.points[x].push(StoredBelief {
            support: support.to_vec(),
            probs,
            value,
            corner_dot,
        });
    }
}

struct LowerBound {
    ny: usize,
    sets: Vec<Vec<AlphaVector>>,
    pruned_at: Vec<usize>,
}

impl LowerBound {
    fn best(&self, x: usize, b: &[f64], support: &[usize]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, v) in self.sets[x].iter().enumerate() {
            let val = v.dot_support(b, support);
            if val > best.1 {
                best = (i, val);
            }
        }
        best
    }

    fn value(&self, x: usize, b: &[f64], support: &[usize]) -> f64 {
        self.best(x, b, support).1
    }

    /// Inserts `v` unless it is pointwise dominated; drops vectors it dominates.
    fn insert(&mut self, x: usize, v: AlphaVector) -> bool {
        let set = &mut self.sets[x];
        if set
            .iter()
            .any(|old| old.values.iter().zip(&v.values).all(|(o, n)| o >= n))
        {
            return false;
        }
        set.retain(|old| !old.values.iter().zip(&v.values).all(|(o, n)| o <= n));
        set.push(v);
        true
    }

    /// Keeps only vectors that are maximal at some stored belief or corner.
    fn prune(&mut self, x: usize, witnesses: &[StoredBelief], roots: &[(Vec<f64>, Vec<usize>)]) {
        let set = &self.sets[x];
        if set.len() < 2 {
            return;
        }
        let mut keep = vec![false; set.len()];
        for y in 0..self.ny {
            let mut best = (0, f64::NEG_INFINITY);
            for (i, v) in set.iter().enumerate() {
                if v.values[y] > best.1 {
                    best = (i, v.values[y]);
                }
            }
            keep[best.0] = true;
        }
        let mut mark = |probs: &dyn Fn(&AlphaVector) -> f64| {
            let mut best = (0, f64::NEG_INFINITY);
            for (i, v) in set.iter().enumerate() {
                let val = probs(v);
                if val > best.1 {
                    best = (i, val);
                }
            }
            keep[best.0] = true;
        };
        for w in witnesses {
            mark(&|v: &AlphaVector| {
                w.support
                    .iter()
                    .zip(&w.probs)
                    .map(|(&y, &p)| v.values[y] * p)
                    .sum()
            });
        }
        for (b, support) in roots {
            mark(&|v: &AlphaVector| v.dot_support(b, support));
        }
        let mut i = 0;
        self.sets[x].retain(|_| {
            let k = keep[i];
            i += 1;
            k
        });
        self.pruned_at[x] = self.sets[x].len();
    }
}

struct Root {
    x: usize,
    px: f64,
    b: Vec<f64>,
    support: Vec<usize>,
}

struct Solver<'a> {
    d: &'a Dynamics,
    lb: LowerBound,
    ub: UpperBound,
    backups: usize,
    deadline: Instant,
    max_backups: usize,
    roots: Vec<Root>,
}

struct ActionEval {
    a: usize,
    children: Vec<dynamics::Child>,
}

fn support_of(b: &[f64]) -> Vec<usize> {
    b.iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(i, _)| i)
        .collect()
}

impl<'a> Solver<'a> {
    fn out_of_budget(&self) -> bool {
        self.backups >= self.max_backups || Instant::now() >= self.deadline
    }

    fn q_upper(&self, x: usize, b: &[f64], support: &[usize], ev: &ActionEval) -> f64 {
        let mut v = self.d.expected_reward(x, ev.a, b, support);
        let mut fut = 0.0;
        for c in &ev.children {
            fut += c.prob * self.ub.value(self.d, c.xn, &c.b, &c.support);
        }
        v += self.d.discount * fut;
        v
    }

    fn evaluate_actions(&self, x: usize, b: &[f64], support: &[usize]) -> Vec<ActionEval> {
        self.d
            .feasible_actions(x)
            .map(|a| ActionEval {
                a,
                children: self.d.children(x, a, b, support),
            })
            .collect()
    }

    fn explore(
        &mut self,
        x: usize,
        b: &[f64],
        support: &[usize],
        depth: usize,
        eps: f64,
    ) -> Result<()> {
        let lb = self.lb.value(x, b, support);
        let ub = self.ub.value(self.d, x, b, support);
        let threshold = eps * self.d.discount.powi(-(depth as i32));
        if ub - lb <= threshold || depth >= MAX_DEPTH {
            return Ok(());
        }
        let evals = self.evaluate_actions(x, b, support);
        if !self.out_of_budget() {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, ev) in evals.iter().enumerate() {
                let q = self.q_upper(x, b, support, ev);
                if q > best.1 {
                    best = (i, q);
                }
            }
            let next_threshold = threshold / self.d.discount;
            let mut pick: Option<(usize, f64)> = None;
            for (j, c) in evals[best.0].children.iter().enumerate() {
                let gap = self.ub.value(self.d, c.xn, &c.b, &c.support)
                    - self.lb.value(c.xn, &c.b, &c.support);
                let excess = c.prob * (gap - next_threshold);
                if excess > 0.0 && pick.map_or(true, |p| excess > p.1) {
                    pick = Some((j, excess));
                }
            }
            if let Some((j, _)) = pick {
                let c = &evals[best.0].children[j];
                let (xn, cb, cs) = (c.xn, c.b.clone(), c.support.clone());
                self.explore(xn, &cb, &cs, depth + 1, eps)?;
            }
        }
        self.backup(x, b, support, &evals)
    }

    fn backup(
        &mut self,
        x: usize,
        b: &[f64],
        support: &[usize],
        evals: &[ActionEval],
    ) -> Result<()> {
        let d = self.d;
        self.backups += 1;
        let mut best_vec: Option<(f64, AlphaVector)> = None;
        let mut ub_best = f64::NEG_INFINITY;
        for ev in evals {
            let a = ev.a;
            // effective next-step vector per reachable x'
            let nxs = d.next_x(x, a);
            let mut h: Vec<Vec<f64>> = Vec::with_capacity(nxs.len());
            for &xn in nxs {
                let mut chosen: Vec<Option<usize>> = vec![None; d.no];
                for c in ev.children.iter().filter(|c| c.xn == xn) {
                    chosen[c.o] = Some(self.lb.best(xn, &c.b, &c.support).0);
                }
                let fallback = if chosen.iter().any(Option::is_none) {
                    let pred = d.predict(x, a, b, support);
                    let p = &pred.iter().find(|e| e.0 == xn).expect("reachable").1;
                    let ps = support_of(p);
                    if ps.is_empty() {
                        0
                    } else {
                        self.lb.best(xn, p, &ps).0
                    }
                } else {
                    0
                };
                let set = &self.lb.sets[xn];
                let mut hv = vec![0.0; d.ny];
                for (yn, slot) in hv.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for &(o, po) in d.obs(a, xn, yn) {
                        let k = chosen[o as usize].unwrap_or(fallback);
                        acc += po * set[k].values[yn];
                    }
                    *slot = acc;
                }
                h.push(hv);
            }
            let r = d.reward_vec(x, a);
            let mut values = vec![0.0; d.ny];
            for (y, slot) in values.iter_mut().enumerate() {
                if d.terminal(x, y) {
                    continue;
                }
                let mut acc = 0.0;
                for s in d.succ(x, a, y) {
                    let k = if nxs.len() == 1 {
                        0
                    } else {
                        nxs.iter()
                            .position(|&v| v == s.xn as usize)
                            .expect("reachable")
                    };
                    acc += s.p * h[k][s.yn as usize];
                }
                *slot = r[y] + d.discount * acc;
            }
            let v = AlphaVector { action: a, values };
            let val = v.dot_support(b, support);
            if best_vec.as_ref().map_or(true, |(bv, _)| val > *bv) {
                best_vec = Some((val, v));
            }
            ub_best = ub_best.max(self.q_upper(x, b, support, ev));
        }
        let (lb_val, vec) = best_vec.expect("at least one feasible action");
        self.lb.insert(x, vec);
        let current_ub = self.ub.value(d, x, b, support);
        if ub_best < current_ub {
            self.ub.update(x, b, support, ub_best);
        } else {
            // keep the belief as a pruning witness
            self.ub.update(x, b, support, current_ub);
        }
        let ub_now = ub_best.min(current_ub);
        let lb_now = self.lb.value(x, b, support).max(lb_val);
        if lb_now > ub_now + CROSSING_TOLERANCE {
            return Err(CoreError::Diverged {
                lower: lb_now,
                upper: ub_now,
                gap: lb_now - ub_now,
            });
        }
        if self.lb.sets[x].len() > 2 * self.lb.pruned_at[x].max(8) {
            let roots: Vec<(Vec<f64>, Vec<usize>)> = self
                .roots
                .iter()
                .filter(|r| r.x == x)
                .map(|r| (r.b.clone(), r.support.clone()))
                .collect();
            self.lb.prune(x, &self.ub.points[x], &roots);
        }
        Ok(())
    }

    fn root_bounds(&self) -> (f64, f64, Vec<f64>) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        let mut gaps = Vec::with_capacity(self.roots.len());
        for r in &self.roots {
            let l = self.lb.value(r.x, &r.b, &r.support);
            let u = self.ub.value(self.d, r.x, &r.b, &r.support);
            lo += r.px * l;
            hi += r.px * u;
            gaps.push(r.px * (u - l).max(0.0));
        }
        (lo, hi, gaps)
    }
}

fn validate_for_solve(model: &MomdpModel, params: &SolveParams) -> Result<()> {
    let violations = model.validate();
    if !violations.is_empty() {
        return Err(CoreError::InvalidModel(violations));
    }
    if !(params.target_precision > 0.0) || !(params.time_budget > 0.0) {
        return Err(CoreError::InvalidSpec(
            "target_precision and time_budget must be positive".into(),
        ));
    }
    Ok(())
}

/// Solves `model` from its initial belief, returning the lower-bound policy.
pub fn solve(model: &MomdpModel, params: &SolveParams) -> Result<AlphaPolicy> {
    validate_for_solve(model, params)?;
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(params.time_budget);
    let d = Dynamics::new(model);

    let blind = bounds::blind_policies(&d, 1e-10, 5_000);
    let mut lb = LowerBound {
        ny: d.ny,
        sets: vec![Vec::new(); d.nx],
        pruned_at: vec![0; d.nx],
    };
    for (a, v) in &blind {
        for x in 0..d.nx {
            lb.insert(
                x,
                AlphaVector {
                    action: *a,
                    values: v[x * d.ny..(x + 1) * d.ny].to_vec(),
                },
            );
        }
    }
    if blind.is_empty() {
        // no globally feasible action: start from the worst-case constant
        let dr = &d;
        let lo = (0..d.nx)
            .flat_map(|x| {
                dr.feasible_actions(x)
                    .flat_map(move |a| dr.reward_vec(x, a).iter().copied())
            })
            .fold(0.0f64, f64::min)
            / (1.0 - d.discount);
        for x in 0..d.nx {
            let a = d.feasible_actions(x).next().unwrap_or(0);
            let values = (0..d.ny)
                .map(|y| if d.terminal(x, y) { 0.0 } else { lo })
                .collect();
            lb.insert(x, AlphaVector { action: a, values });
        }
    }

    let mdp = bounds::mdp_q(&d, 1e-9, 10_000);
    let fib_deadline = start + Duration::from_secs_f64(params.time_budget * 0.25);
    let fib = bounds::fib(&d, mdp, 1e-7, 2_000, fib_deadline);
    let ub = UpperBound::new(&d, fib);

    let roots: Vec<Root> = (0..d.nx)
        .filter_map(|x| {
            let (px, b) = model.initial_given_x(x);
            (px > 0.0).then(|| {
                let support = support_of(&b);
                Root { x, px, b, support }
            })
        })
        .collect();

    let mut solver = Solver {
        d: &d,
        lb,
        ub,
        backups: 0,
        deadline,
        max_backups: params.max_backups,
        roots,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    loop {
        let (lo, hi, gaps) = solver.root_bounds();
        if lo > hi + CROSSING_TOLERANCE {
            return Err(CoreError::Diverged {
                lower: lo,
                upper: hi,
                gap: lo - hi,
            });
        }
        let gap = hi - lo;
        if gap <= params.target_precision || solver.out_of_budget() {
            break;
        }
        let total: f64 = gaps.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        let mut pick = gaps.len() - 1;
        for (i, g) in gaps.iter().enumerate() {
            if u < *g {
                pick = i;
                break;
            }
            u -= g;
        }
        let eps = params.target_precision.max(GAP_FRACTION * gap);
        let (x, b, s) = {
            let r = &solver.roots[pick];
            (r.x, r.b.clone(), r.support.clone())
        };
        let before = solver.backups;
        solver.explore(x, &b, &s, 0, eps)?;
        if solver.backups == before {
            // root already within its local threshold; force a backup there
            let evals = solver.evaluate_actions(x, &b, &s);
            solver.backup(x, &b, &s, &evals)?;
        }
    }
    let (lo, hi, _) = solver.root_bounds();
    let mut policy = AlphaPolicy::new(d.nx, d.ny);
    policy.vectors = solver.lb.sets;
    policy.stats = SolveStats {
        precision: (hi - lo).max(0.0),
        lower: lo,
        upper: hi,
        backups: solver.backups,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok(policy)
}

/// Fully observable action values on the flat state space, `(x * Y + y) * A + a`.
/// Infeasible entries are `-inf`.
pub fn mdp_action_values(model: &MomdpModel) -> Vec<f64> {
    let d = Dynamics::new(model);
    let q = bounds::mdp_q(&d, 1e-10, 20_000);
    let mut out = vec![0.0; d.nx * d.ny * d.na];
    for x in 0..d.nx {
        for a in 0..d.na {
            for y in 0..d.ny {
                out[(x * d.ny + y) * d.na + a] = q[(x * d.na + a) * d.ny + y];
            }
        }
    }
    out
}
