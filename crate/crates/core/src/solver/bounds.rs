//! Initial bounds: blind (fixed-action) policies from below, the MDP and
//! fast informed bounds from above.
//!
//! Every iteration scheme here starts on the safe side of its fixed point and
//! applies a monotone operator, so any intermediate iterate is already a valid
//! bound. Iteration can stop early without losing soundness.

use std::time::Instant;

use super::dynamics::Dynamics;

fn reward_range(d: &Dynamics) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in 0..d.nx {
        for a in d.feasible_actions(x) {
            for &r in d.reward_vec(x, a) {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
    }
    (lo.min(0.0), hi.max(0.0))
}

/// Fixed-action policy values, `(x * Y + y)` per action. Only actions feasible
/// at every visible state are included.
pub(crate) fn blind_policies(d: &Dynamics, tol: f64, max_iter: usize) -> Vec<(usize, Vec<f64>)> {
    let (lo, _) = reward_range(d);
    let start = lo / (1.0 - d.discount);
    let mut out = Vec::new();
    for a in 0..d.na {
        if !(0..d.nx).all(|x| d.feasible(x, a)) {
            continue;
        }
        let mut v = vec![start; d.nx * d.ny];
        for x in 0..d.nx {
            for y in 0..d.ny {
                if d.terminal(x, y) {
                    v[x * d.ny + y] = 0.0;
                }
            }
        }
        for _ in 0..max_iter {
            let mut delta: f64 = 0.0;
            for x in 0..d.nx {
                let r = d.reward_vec(x, a);
                for y in 0..d.ny {
                    if d.terminal(x, y) {
                        continue;
                    }
                    let mut acc = 0.0;
                    for s in d.succ(x, a, y) {
                        acc += s.p * v[s.xn as usize * d.ny + s.yn as usize];
                    }
                    let nv = r[y] + d.discount * acc;
                    let i = x * d.ny + y;
                    delta = delta.max((nv - v[i]).abs());
                    v[i] = nv;
                }
            }
            if delta < tol {
                break;
            }
        }
        out.push((a, v));
    }
    out
}

/// Fully observable Q-values, `(x * A + a) * Y + y`.
pub(crate) fn mdp_q(d: &Dynamics, tol: f64, max_iter: usize) -> Vec<f64> {
    let (_, hi) = reward_range(d);
    let start = hi / (1.0 - d.discount);
    let mut v: Vec<f64> = (0..d.nx * d.ny)
        .map(|i| {
            if d.terminal(i / d.ny, i % d.ny) {
                0.0
            } else {
                start
            }
        })
        .collect();
    let mut q = vec![0.0; d.nx * d.na * d.ny];
    for _ in 0..max_iter {
        let mut delta: f64 = 0.0;
        for x in 0..d.nx {
            for y in 0..d.ny {
                if d.terminal(x, y) {
                    continue;
                }
                let mut best = f64::NEG_INFINITY;
                for a in d.feasible_actions(x) {
                    let mut acc = 0.0;
                    for s in d.succ(x, a, y) {
                        acc += s.p * v[s.xn as usize * d.ny + s.yn as usize];
                    }
                    let qa = d.reward_vec(x, a)[y] + d.discount * acc;
                    q[(x * d.na + a) * d.ny + y] = qa;
                    best = best.max(qa);
                }
                let i = x * d.ny + y;
                delta = delta.max((best - v[i]).abs());
                v[i] = best;
            }
        }
        if delta < tol {
            break;
        }
    }
    // infeasible entries carry no meaning; keep them at the floor
    for x in 0..d.nx {
        for a in 0..d.na {
            if !d.feasible(x, a) {
                for y in 0..d.ny {
                    q[(x * d.na + a) * d.ny + y] = f64::NEG_INFINITY;
                }
            }
        }
    }
    q
}

/// Fast informed bound, refined in place from `q` (which must be an upper
/// bound that the operator does not increase, e.g. the MDP bound).
pub(crate) fn fib(
    d: &Dynamics,
    mut q: Vec<f64>,
    tol: f64,
    max_iter: usize,
    deadline: Instant,
) -> Vec<f64> {
    let mut acc = vec![0.0; d.no * d.na];
    let mut touched: Vec<bool> = vec![false; d.no];
    for _ in 0..max_iter {
        if Instant::now() > deadline {
            break;
        }
        let mut delta: f64 = 0.0;
        for x in 0..d.nx {
            for a in d.feasible_actions(x) {
                let nxs: Vec<usize> = d.next_x(x, a).to_vec();
                for y in 0..d.ny {
                    if d.terminal(x, y) {
                        continue;
                    }
                    let mut total = 0.0;
                    for &xn in &nxs {
                        acc.iter_mut().for_each(|v| *v = 0.0);
                        touched.iter_mut().for_each(|t| *t = false);
                        for s in d.succ(x, a, y) {
                            if s.xn as usize != xn {
                                continue;
                            }
                            let yn = s.yn as usize;
                            for &(o, po) in d.obs(a, xn, yn) {
                                let w = s.p * po;
                                let o = o as usize;
                                touched[o] = true;
                                let row = &mut acc[o * d.na..(o + 1) * d.na];
                                for an in 0..d.na {
                                    let qv = q[(xn * d.na + an) * d.ny + yn];
                                    if qv.is_finite() {
                                        row[an] += w * qv;
                                    }
                                }
                            }
                        }
                        for o in 0..d.no {
                            if !touched[o] {
                                continue;
                            }
                            let mut best = f64::NEG_INFINITY;
                            for an in d.feasible_actions(xn) {
                                best = best.max(acc[o * d.na + an]);
                            }
                            total += best;
                        }
                    }
                    let i = (x * d.na + a) * d.ny + y;
                    let nv = d.reward_vec(x, a)[y] + d.discount * total;
                    // never let rounding push the bound up
                    if nv < q[i] {
                        delta = delta.max(q[i] - nv);
                        q[i] = nv;
                    }
                }
            }
        }
        if delta < tol {
            break;
        }
    }
    q
}
