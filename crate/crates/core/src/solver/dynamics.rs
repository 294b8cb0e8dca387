//! Flattened successor and observation tables used by the solver hot loops.

use crate::model::MomdpModel;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Succ {
    pub xn: u32,
    pub yn: u32,
    pub p: f64,
}

/// A successor belief reached through `(a, x', o)` with its probability.
#[derive(Debug, Clone)]
pub(crate) struct Child {
    pub xn: usize,
    pub o: usize,
    pub prob: f64,
    /// Normalized hidden belief, dense.
    pub b: Vec<f64>,
    pub support: Vec<usize>,
}

#[derive(Debug)]
pub(crate) struct Dynamics {
    pub nx: usize,
    pub ny: usize,
    pub na: usize,
    pub no: usize,
    pub discount: f64,
    succ_off: Vec<usize>,
    succ: Vec<Succ>,
    next_x: Vec<Vec<usize>>,
    obs_off: Vec<usize>,
    obs: Vec<(u32, f64)>,
    /// `(x * A + a) * Y + y`
    reward: Vec<f64>,
    feasible: Vec<bool>,
    terminal: Vec<bool>,
}

impl Dynamics {
    pub fn new(m: &MomdpModel) -> Self {
        let (nx, ny, na, no) = (m.x_count, m.y_count, m.action_count(), m.obs_count());
        let mut succ_off = Vec::with_capacity(nx * na * ny + 1);
        let mut succ = Vec::new();
        let mut next_x = vec![Vec::new(); nx * na];
        let mut reward = vec![0.0; nx * na * ny];
        for x in 0..nx {
            for a in 0..na {
                for y in 0..ny {
                    succ_off.push(succ.len());
                    for (xn, yn, p) in m.successors(x, y, a) {
                        if p > 0.0 {
                            succ.push(Succ {
                                xn: xn as u32,
                                yn: yn as u32,
                                p,
                            });
                            let nxs = &mut next_x[x * na + a];
                            if !nxs.contains(&xn) {
                                nxs.push(xn);
                            }
                        }
                    }
                    reward[(x * na + a) * ny + y] = m.reward(x, y, a);
                }
            }
        }
        succ_off.push(succ.len());
        for v in next_x.iter_mut() {
            v.sort_unstable();
        }
        let mut obs_off = Vec::with_capacity(na * nx * ny + 1);
        let mut obs = Vec::new();
        for a in 0..na {
            for xn in 0..nx {
                for yn in 0..ny {
                    obs_off.push(obs.len());
                    for (o, p) in m.obs_row(a, xn, yn).iter() {
                        if p > 0.0 {
                            obs.push((o as u32, p));
                        }
                    }
                }
            }
        }
        obs_off.push(obs.len());
        Self {
            nx,
            ny,
            na,
            no,
            discount: m.discount,
            succ_off,
            succ,
            next_x,
            obs_off,
            obs,
            reward,
            feasible: m.feasible.clone(),
            terminal: m.terminal.clone(),
        }
    }

    #[inline]
    pub fn succ(&self, x: usize, a: usize, y: usize) -> &[Succ] {
        let i = (x * self.na + a) * self.ny + y;
        &self.succ[self.succ_off[i]..self.succ_off[i + 1]]
    }

    #[inline]
    pub fn next_x(&self, x: usize, a: usize) -> &[usize] {
        &self.next_x[x * self.na + a]
    }

    #[inline]
    pub fn obs(&self, a: usize, xn: usize, yn: usize) -> &[(u32, f64)] {
        let i = (a * self.nx + xn) * self.ny + yn;
        &self.obs[self.obs_off[i]..self.obs_off[i + 1]]
    }

    #[inline]
    pub fn reward_vec(&self, x: usize, a: usize) -> &[f64] {
        let i = (x * self.na + a) * self.ny;
        &self.reward[i..i + self.ny]
    }

    #[inline]
    pub fn feasible(&self, x: usize, a: usize) -> bool {
        self.feasible[x * self.na + a]
    }

    #[inline]
    pub fn terminal(&self, x: usize, y: usize) -> bool {
        self.terminal[x * self.ny + y]
    }

    pub fn feasible_actions(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.na).filter(move |&a| self.feasible(x, a))
    }

    /// Expected immediate reward of `a` under `b`.
    pub fn expected_reward(&self, x: usize, a: usize, b: &[f64], support: &[usize]) -> f64 {
        let r = self.reward_vec(x, a);
        support.iter().map(|&y| r[y] * b[y]).sum()
    }

    /// Predicted (pre-observation) hidden mass per reachable `x'`, unnormalized.
    pub fn predict(
        &self,
        x: usize,
        a: usize,
        b: &[f64],
        support: &[usize],
    ) -> Vec<(usize, Vec<f64>)> {
        let nxs = self.next_x(x, a);
        let mut pred: Vec<(usize, Vec<f64>)> =
            nxs.iter().map(|&xn| (xn, vec![0.0; self.ny])).collect();
        for &y in support {
            let w = b[y];
            for s in self.succ(x, a, y) {
                let xn = s.xn as usize;
                let slot = if pred.len() == 1 {
                    0
                } else {
                    pred.iter().position(|e| e.0 == xn).expect("reachable")
                };
                pred[slot].1[s.yn as usize] += w * s.p;
            }
        }
        pred
    }

    /// All successor beliefs of `(x, b)` under `a`, skipping zero-probability branches.
    pub fn children(&self, x: usize, a: usize, b: &[f64], support: &[usize]) -> Vec<Child> {
        let mut out = Vec::new();
        for (xn, pred) in self.predict(x, a, b, support) {
            let mut per_obs: Vec<Option<Vec<f64>>> = vec![None; self.no];
            for (yn, &py) in pred.iter().enumerate() {
                if py == 0.0 {
                    continue;
                }
                for &(o, po) in self.obs(a, xn, yn) {
                    let slot = per_obs[o as usize].get_or_insert_with(|| vec![0.0; self.ny]);
                    slot[yn] += py * po;
                }
            }
            for (o, v) in per_obs.into_iter().enumerate() {
                let Some(mut v) = v else { continue };
                let prob: f64 = v.iter().sum();
                if prob <= 0.0 {
                    continue;
                }
                let mut support = Vec::new();
                for (yn, p) in v.iter_mut().enumerate() {
                    if *p != 0.0 {
                        *p /= prob;
                        support.push(yn);
                    }
                }
                out.push(Child {
                    xn,
                    o,
                    prob,
                    b: v,
                    support,
                });
            }
        }
        out
    }
}
