//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Solved policies are cached under the cargo target tmpdir so reruns skip the
//! solves. Delete `acceptance-policies` there to force fresh ones.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use advisor_core::augment::{augment_types, joint_update};
use advisor_core::domains::{DomainConfig, RockSampleConfig, TagConfig};
use advisor_core::evaluate::evaluate_policy;
use advisor_core::model::random_model;
use advisor_core::pipeline::{BASE_MODEL, BASE_POLICY, BASE_Q};
use advisor_core::suggest::{
    mixing_steps, softmax, suggestion_distribution, LambdaSchedule, SuggesterSpec, Suggestion,
};
use advisor_core::*;
use advisor_harness::config::{AskConfig, AskLimit, PolicyConfig};
use advisor_harness::experiment::run_batch_simulation;
use advisor_harness::records::to_jsonl_string;
use advisor_harness::sim::{BatchProvider, BatchSuggester, Simulation};
use advisor_harness::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TYPES: [f64; 5] = [0.0, 1.0, 2.0, 5.0, 10.0];
const PRIOR: [f64; 5] = [0.1, 0.2, 0.4, 0.2, 0.1];

/// Solve budgets in seconds.
const BASE_TIME: f64 = 60.0;
const AUGMENTED_TIME: f64 = 300.0;

type Outcome = std::result::Result<(bool, String), String>;

struct Lab {
    root: PathBuf,
    cache: HashMap<PathBuf, Policies>,
}

fn tag() -> DomainConfig {
    DomainConfig::Tag(TagConfig::default())
}

fn rs(n: usize, k: usize) -> DomainConfig {
    DomainConfig::Rocksample(RockSampleConfig::new(n, k, 10.0, -1.0))
}

fn domain_key(d: &DomainConfig) -> String {
    match d {
        DomainConfig::Tag(_) => "tag".into(),
        DomainConfig::Rocksample(c) => format!("rs{}{}", c.n, c.k),
    }
}

fn mt(t_p: f64) -> AgentSpec {
    AgentSpec::MultiType {
        spec: SuggesterSpec::new(TYPES.to_vec(), t_p, PRIOR.to_vec()).unwrap(),
    }
}

fn noisy(lambda: f64) -> SuggesterConfig {
    SuggesterConfig::NoisyRational {
        schedule: LambdaSchedule::constant(lambda),
    }
}

fn unlimited_asks() -> AskConfig {
    AskConfig {
        enabled: true,
        c_ask: -1.0,
        n_ask: None,
        limit: AskLimit::PerTrial,
    }
}

impl Lab {
    fn config(
        &self,
        domain: DomainConfig,
        agent: AgentSpec,
        suggester: SuggesterConfig,
        ask: AskConfig,
        n_simulations: usize,
        trials: usize,
    ) -> ExperimentConfig {
        let stem = match agent.suggester_spec() {
            None => "base".to_string(),
            Some(_) => {
                let asks = if ask.enabled {
                    format!("ask{}{:?}", ask.c_ask, ask.n_ask)
                } else {
                    "typed".into()
                };
                format!("{}-{}", agent.label(), asks)
            }
        };
        ExperimentConfig {
            policies: PolicyConfig {
                dir: self.root.join(domain_key(&domain)).join(stem),
                precision: 0.01,
                time: BASE_TIME,
                augmented_time: Some(AUGMENTED_TIME),
                rng_seed: 0,
            },
            domain,
            agent,
            suggester,
            ask,
            n_simulations,
            trials_per_simulation: trials,
            max_steps_per_trial: None,
            seed: 20_261_019,
            output: None,
        }
    }

    /// Loads or solves, reusing one base solve per domain.
    fn policies(&mut self, cfg: &ExperimentConfig) -> Policies {
        let dir = cfg.policies.dir.clone();
        if let Some(p) = self.cache.get(&dir) {
            return p.clone();
        }
        let base_dir = self.root.join(domain_key(&cfg.domain)).join("base");
        if dir != base_dir {
            let base_cfg = ExperimentConfig {
                agent: AgentSpec::Normal,
                policies: PolicyConfig {
                    dir: base_dir.clone(),
                    ..cfg.policies.clone()
                },
                ..cfg.clone()
            };
            self.policies(&base_cfg);
            std::fs::create_dir_all(&dir).unwrap();
            for f in [BASE_MODEL, BASE_POLICY, BASE_Q] {
                if !dir.join(f).exists() {
                    std::fs::copy(base_dir.join(f), dir.join(f)).unwrap();
                }
            }
        }
        let started = Instant::now();
        let pol =
            Policies::prepare(cfg).unwrap_or_else(|e| panic!("preparing {}: {e}", dir.display()));
        let secs = started.elapsed().as_secs_f64();
        if secs > 1.0 {
            let stats = pol
                .augmented
                .as_ref()
                .map_or(&pol.base_policy.stats, |a| &a.policy.stats);
            println!(
                "  solved {} in {secs:.0} s (lower {:.3}, upper {:.3})",
                dir.strip_prefix(&self.root).unwrap_or(&dir).display(),
                stats.lower,
                stats.upper
            );
        }
        self.cache.insert(dir, pol.clone());
        pol
    }

    fn run(&mut self, cfg: &ExperimentConfig) -> Vec<TrialRecord> {
        let pol = self.policies(cfg);
        run_experiment(cfg, &pol).unwrap()
    }

    fn summary(&mut self, cfg: &ExperimentConfig) -> Summary {
        summarize(&self.run(cfg)).unwrap()
    }
}

fn reward(s: &Summary) -> Stat {
    s.overall("undiscounted_reward").unwrap().clone()
}

fn fmt(s: &Stat) -> String {
    format!("{:.2}+-{:.2}", s.mean, s.ci95_half_width)
}

// ---------------------------------------------------------------------------

fn softmax_fidelity(_: &mut Lab) -> Outcome {
    let q = QTable {
        rows: 1,
        cols: 3,
        x_count: 1,
        y_count: 1,
        values: vec![5.0, 4.0, 3.0],
    };
    let flat = suggestion_distribution(&q, 0, 0.0, None);
    let sharp = suggestion_distribution(&q, 0, 1.0, None);
    let want = [0.67, 0.24, 0.09];
    let err0 = flat
        .iter()
        .map(|p| (p - 1.0 / 3.0).abs())
        .fold(0.0, f64::max);
    let err1 = sharp
        .iter()
        .zip(want)
        .map(|(p, w)| (p - w).abs())
        .fold(0.0, f64::max);
    Ok((
        err0 <= 0.005 && err1 <= 0.005,
        format!(
            "lambda=1 gives {sharp:.4?}, max error {:.4}",
            err0.max(err1)
        ),
    ))
}

fn mixing_time(_: &mut Lab) -> Outcome {
    let spec = SuggesterSpec::uniform_prior(TYPES.to_vec(), 0.05).map_err(|e| e.to_string())?;
    let steps = mixing_steps(&spec, 0.1).map_err(|e| e.to_string())?;
    Ok((steps == 33, format!("{steps} steps to total variation 0.1")))
}

fn joint_update_oracle(_: &mut Lab) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let mut worst: f64 = 0.0;
    let mut models = 0;
    while models < 100 {
        let nx = rng.gen_range(1..=2);
        let ny = rng.gen_range(1..=4 / nx);
        let na = rng.gen_range(2..=4);
        let no = rng.gen_range(1..=3);
        let base = random_model(&mut rng, nx, ny, na, no, 0.9);
        let q = QTable {
            rows: base.flat_count(),
            cols: na,
            x_count: nx,
            y_count: ny,
            values: (0..base.flat_count() * na)
                .map(|_| rng.gen_range(-5.0..5.0))
                .collect(),
        };
        let nt = rng.gen_range(1..=3);
        let mut picks = rand::seq::index::sample(&mut rng, TYPES.len(), nt).into_vec();
        picks.sort_unstable();
        let types: Vec<f64> = picks.iter().map(|&i| TYPES[i]).collect();
        let t_p = if nt == 1 {
            0.0
        } else {
            rng.gen_range(0.0..0.2)
        };
        let spec = SuggesterSpec::uniform_prior(types.clone(), t_p).map_err(|e| e.to_string())?;
        let tm = augment_types(&base, &spec, &q).map_err(|e| e.to_string())?;
        models += 1;

        for _ in 0..10 {
            let x = rng.gen_range(0..nx);
            let mut b: Vec<f64> = (0..ny * nt).map(|_| rng.gen::<f64>()).collect();
            let z: f64 = b.iter().sum();
            b.iter_mut().for_each(|v| *v /= z);
            let b = FactoredBelief::new(x, b);
            let a = rng.gen_range(0..na);
            let y0 = rng.gen_range(0..ny);
            let succ = base.successors(x, y0, a);
            let (xn, yn, _) = succ[rng.gen_range(0..succ.len())];
            let o = base.obs_row(a, xn, yn).iter().next().unwrap().0;
            let sigma = if rng.gen_bool(0.2) {
                Suggestion::Absent
            } else {
                Suggestion::Action(rng.gen_range(0..na))
            };
            // brute force over the flat joint space (x, y, type)
            let mut post = vec![0.0; ny * nt];
            for y in 0..ny {
                for k in 0..nt {
                    for (x2, y2, pt) in base.successors(x, y, a) {
                        if x2 != xn {
                            continue;
                        }
                        for kn in 0..nt {
                            let pk = match (nt, k == kn) {
                                (1, _) => 1.0,
                                (_, true) => 1.0 - t_p,
                                _ => t_p / (nt - 1) as f64,
                            };
                            let ps = match sigma {
                                Suggestion::Absent => 1.0,
                                Suggestion::Action(s) => {
                                    softmax(q.row(base.flat(x2, y2)), types[kn])[s]
                                }
                            };
                            post[y2 * nt + kn] +=
                                b.b_y[y * nt + k] * pt * pk * base.obs_row(a, x2, y2).get(o) * ps;
                        }
                    }
                }
            }
            let z: f64 = post.iter().sum();
            match joint_update(&tm, &b, a, xn, o, sigma) {
                Ok(got) => {
                    for (g, p) in got.b_y.iter().zip(&post) {
                        worst = worst.max((g - p / z).abs());
                    }
                }
                Err(CoreError::ZeroLikelihood { .. }) if z < 1e-300 => {}
                Err(e) => return Err(format!("update failed with evidence {z}: {e}")),
            }
        }
    }
    Ok((
        worst <= 1e-12,
        format!("{models} models x 10 updates, max deviation {worst:.2e}"),
    ))
}

fn solver_soundness(_: &mut Lab) -> Outcome {
    let domain = advisor_core::domains::Domain::build(&rs(4, 4)).map_err(|e| e.to_string())?;
    let m = domain.model();
    let policy = solve(m, &SolveParams::with_budget(0.01, 300.0)).map_err(|e| e.to_string())?;
    let s = &policy.stats;
    let x0 = (0..m.x_count)
        .find(|&x| m.initial_x_marginal()[x] > 0.0)
        .unwrap();
    let v0 = belief_value(&policy, &FactoredBelief::initial(m, x0)).map_err(|e| e.to_string())?;
    let est = evaluate_policy(m, &policy, 2000, 1000, 99).map_err(|e| e.to_string())?;
    let within = (est.mean - v0).abs() <= 3.0 * est.stderr;
    Ok((
        s.precision <= 0.1 && s.wall_time_secs <= 300.0 && within,
        format!(
            "gap {:.4} after {:.1} s; rollout {:.3}+-{:.3} (stderr) vs belief value {v0:.3}",
            s.precision, s.wall_time_secs, est.mean, est.stderr
        ),
    ))
}

fn type_inference(lab: &mut Lab) -> Outcome {
    let cfg = lab.config(tag(), mt(0.0), noisy(5.0), AskConfig::default(), 200, 10);
    let records = lab.run(&cfg);
    let k5 = TYPES.iter().position(|&t| t == 5.0).unwrap();
    let mut hits = 0;
    for sim in 0..cfg.n_simulations {
        let found = records
            .iter()
            .filter(|r| r.simulation == sim)
            .any(|r| r.type_marginal.as_ref().is_some_and(|m| m[k5] > 0.5));
        hits += usize::from(found);
    }
    let final_mass: f64 = records
        .iter()
        .filter(|r| r.trial == 9)
        .map(|r| r.type_marginal.as_ref().unwrap()[k5])
        .sum::<f64>()
        / cfg.n_simulations as f64;
    let frac = hits as f64 / cfg.n_simulations as f64;
    Ok((
        frac >= 0.8,
        format!(
            "{hits}/{} simulations put > 0.5 on lambda=5 within 10 trials; mean mass after trial 10 {final_mass:.3}",
            cfg.n_simulations
        ),
    ))
}

const RANK_SIMS: usize = 1000;
const RANK_TRIALS: usize = 15;

fn ranking(lab: &mut Lab) -> Outcome {
    let stars = [1.0, 2.0, 5.0];
    let mut normal = Vec::new();
    let mut naive = Vec::new();
    let mut ok_c = true;
    let mut notes = Vec::new();
    for &star in &stars {
        let run = |lab: &mut Lab, agent: AgentSpec| {
            let cfg = lab.config(
                tag(),
                agent,
                noisy(star),
                AskConfig::default(),
                RANK_SIMS,
                RANK_TRIALS,
            );
            reward(&lab.summary(&cfg))
        };
        normal.push(run(lab, AgentSpec::Normal));
        naive.push(run(lab, AgentSpec::Naive { nu: 1.0 }));
        let fixed: Vec<(f64, Stat)> = stars
            .iter()
            .map(|&l| (l, run(lab, AgentSpec::NoisyFixed { lambda: l })))
            .collect();
        let multi = run(lab, mt(0.0));
        let (best_l, best) = fixed
            .iter()
            .max_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
            .unwrap();
        let close = (multi.mean - best.mean).abs() <= multi.ci95_half_width;
        ok_c &= close;
        notes.push(format!(
            "l*={star}: normal {} naive {} mt {} best noisy(l={best_l}) {}",
            fmt(normal.last().unwrap()),
            fmt(naive.last().unwrap()),
            fmt(&multi),
            fmt(best)
        ));
    }
    let ok_a = normal.windows(2).all(|w| w[0].overlaps(&w[1])) && normal[0].overlaps(&normal[2]);
    let ok_b = naive.windows(2).all(|w| w[1].mean > w[0].mean);
    Ok((
        ok_a && ok_b && ok_c,
        format!(
            "(a) {} (b) {} (c) {}; {}",
            pass(ok_a),
            pass(ok_b),
            pass(ok_c),
            notes.join("; ")
        ),
    ))
}

fn pass(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "failed"
    }
}

const DYN_SIMS: usize = 1000;
const DYN_SWITCH: usize = 20;
const DYN_TRIALS: usize = 50;

fn dynamic_adaptation(lab: &mut Lab) -> Outcome {
    let schedule = SuggesterConfig::NoisyRational {
        schedule: LambdaSchedule {
            segments: vec![
                advisor_core::suggest::ScheduleSegment {
                    from_trial: 0,
                    lambda: 5.0,
                },
                advisor_core::suggest::ScheduleSegment {
                    from_trial: DYN_SWITCH,
                    lambda: 0.0,
                },
            ],
        },
    };
    let normal_cfg = lab.config(
        tag(),
        AgentSpec::Normal,
        schedule.clone(),
        AskConfig::default(),
        DYN_SIMS,
        DYN_TRIALS,
    );
    let normal = reward(&lab.summary(&normal_cfg));
    let mut recovery = Vec::new();
    let mut shift = Vec::new();
    let mut notes = Vec::new();
    for t_p in [0.0, 0.05] {
        let cfg = lab.config(
            tag(),
            mt(t_p),
            schedule.clone(),
            AskConfig::default(),
            DYN_SIMS,
            DYN_TRIALS,
        );
        let s = lab.summary(&cfg);
        let rewards = s.series("undiscounted_reward");
        let types = s.series("expected_type");
        // first post-switch trial whose reward band reaches the suggestion-free level
        let rec = (DYN_SWITCH..DYN_TRIALS)
            .find(|&t| rewards[t].overlaps(&normal))
            .map_or(usize::MAX, |t| t - DYN_SWITCH);
        // first post-switch trial whose mean expected type has covered half the
        // distance from its pre-switch level to the new coefficient
        let before = types[DYN_SWITCH - 1].mean;
        let half = before / 2.0;
        let moved = (DYN_SWITCH..DYN_TRIALS)
            .find(|&t| types[t].mean <= half)
            .map_or(usize::MAX, |t| t - DYN_SWITCH);
        notes.push(format!(
            "t_p={t_p}: trials to recover {}, trials to half-way type {} (type {:.2} -> {:.2} -> {:.2}, reward at switch {})",
            show(rec),
            show(moved),
            before,
            types[DYN_SWITCH].mean,
            types[DYN_TRIALS - 1].mean,
            fmt(&rewards[DYN_SWITCH])
        ));
        recovery.push(rec);
        shift.push(moved);
    }
    let ok = recovery[1] < recovery[0] && shift[1] < shift[0];
    Ok((
        ok,
        format!("normal level {}; {}", fmt(&normal), notes.join("; ")),
    ))
}

fn show(t: usize) -> String {
    if t == usize::MAX {
        "never".into()
    } else {
        t.to_string()
    }
}

const ASK_SIMS: usize = 1000;
const ASK_TRIALS: usize = 15;

fn ask_economics(lab: &mut Lab) -> Outcome {
    let mut asks = Vec::new();
    for lambda in [1.0, 2.0, 5.0] {
        let cfg = lab.config(
            rs(8, 4),
            AgentSpec::NoisyFixed { lambda },
            noisy(0.0),
            unlimited_asks(),
            ASK_SIMS,
            ASK_TRIALS,
        );
        asks.push(lab.summary(&cfg).overall("asks").unwrap().clone());
    }
    let ok = asks[0].mean == 0.0 && asks[2].mean > asks[1].mean;
    Ok((
        ok,
        format!(
            "asks per trial at l*=0: noisy(1) {} noisy(2) {} noisy(5) {}",
            fmt(&asks[0]),
            fmt(&asks[1]),
            fmt(&asks[2])
        ),
    ))
}

fn ask_suppression(lab: &mut Lab) -> Outcome {
    let mut asks = Vec::new();
    for star in [0.0, 5.0] {
        let cfg = lab.config(
            tag(),
            mt(0.0),
            noisy(star),
            unlimited_asks(),
            ASK_SIMS,
            ASK_TRIALS,
        );
        asks.push(lab.summary(&cfg).overall("asks").unwrap().clone());
    }
    let ratio = asks[1].mean / asks[0].mean;
    Ok((
        asks[0].mean * 3.0 <= asks[1].mean,
        format!(
            "asks per trial: l*=0 {} vs l*=5 {} (ratio {ratio:.2})",
            fmt(&asks[0]),
            fmt(&asks[1])
        ),
    ))
}

fn heuristic_robustness(lab: &mut Lab) -> Outcome {
    let base_cfg = lab.config(
        tag(),
        AgentSpec::Normal,
        SuggesterConfig::None,
        AskConfig::default(),
        ASK_SIMS,
        ASK_TRIALS,
    );
    let normal = reward(&lab.summary(&base_cfg));
    let mut ok = true;
    let mut notes = vec![format!("normal {}", fmt(&normal))];
    for t_p in [0.0, 0.05] {
        let cfg = lab.config(
            tag(),
            mt(t_p),
            SuggesterConfig::Heuristic,
            unlimited_asks(),
            ASK_SIMS,
            ASK_TRIALS,
        );
        let s = lab.summary(&cfg);
        let r = reward(&s);
        ok &= r.lower() > normal.upper();
        notes.push(format!(
            "mt(t_p={t_p}) {} with {:.2} asks per trial",
            fmt(&r),
            s.overall("asks").unwrap().mean
        ));
    }
    Ok((ok, notes.join("; ")))
}

/// Sums the step rewards a simulation reports.
struct StepLedger<'p> {
    inner: BatchProvider<'p>,
    discount: f64,
    running: (f64, f64, f64, usize),
    trials: Vec<(f64, f64, usize, usize)>,
    ask_action: Option<usize>,
    c_ask: f64,
    bad_ask_reward: usize,
}

impl SuggestionProvider for StepLedger<'_> {
    fn suggest(&mut self, ctx: &SuggestContext<'_>) -> advisor_harness::Result<Suggestion> {
        self.inner.suggest(ctx)
    }

    fn on_step(&mut self, e: &StepEvent) -> advisor_harness::Result<()> {
        let (d, u, f, asks) = &mut self.running;
        *d += *f * e.reward;
        *u += e.reward;
        *f *= self.discount;
        if Some(e.action) == self.ask_action {
            *asks += 1;
            // RockSample asks leave the world alone, so only the ask cost is paid
            if e.reward != self.c_ask {
                self.bad_ask_reward += 1;
            }
        }
        if e.done {
            self.trials.push((*d, *u, e.step, *asks));
            self.running = (0.0, 0.0, 1.0, 0);
        }
        Ok(())
    }
}

fn determinism_and_accounting(lab: &mut Lab) -> Outcome {
    let mut problems = Vec::new();

    // identical seeds, identical streams
    let cfg = lab.config(tag(), mt(0.05), noisy(2.0), AskConfig::default(), 8, 5);
    let pol = lab.policies(&cfg);
    let first = to_jsonl_string(&run_experiment(&cfg, &pol).unwrap());
    let second = to_jsonl_string(&run_experiment(&cfg, &pol).unwrap());
    if first != second {
        problems.push("repeated run differs".to_string());
    }
    let sequential: Vec<TrialRecord> = (0..cfg.n_simulations)
        .flat_map(|i| run_batch_simulation(&cfg, &pol, i).unwrap())
        .collect();
    if to_jsonl_string(&sequential) != first {
        problems.push("parallel and sequential runs differ".to_string());
    }

    // budgets
    let mut checked_trials = 0;
    for limit in [AskLimit::PerTrial, AskLimit::PerSimulation] {
        let ask = AskConfig {
            enabled: true,
            c_ask: -1.0,
            n_ask: Some(2),
            limit,
        };
        let cfg = lab.config(
            rs(8, 4),
            AgentSpec::NoisyFixed { lambda: 5.0 },
            noisy(5.0),
            ask,
            200,
            15,
        );
        let records = lab.run(&cfg);
        checked_trials += records.len();
        let over = match limit {
            AskLimit::PerTrial => records.iter().filter(|r| r.asks > 2).count(),
            AskLimit::PerSimulation => (0..cfg.n_simulations)
                .filter(|&s| {
                    records
                        .iter()
                        .filter(|r| r.simulation == s)
                        .map(|r| r.asks)
                        .sum::<usize>()
                        > 2
                })
                .count(),
        };
        if over > 0 {
            problems.push(format!("{over} budget violations under {limit:?}"));
        }
        if records.iter().all(|r| r.asks == 0) {
            problems.push(format!("no asks at all under {limit:?}; budget untested"));
        }

        // reward accounting, step by step
        let pol = lab.policies(&cfg);
        let aug = pol.augmented.as_ref().unwrap();
        for sim in 0..20 {
            let mut ledger = StepLedger {
                inner: BatchProvider {
                    suggester: BatchSuggester::new(&cfg, sim),
                    policies: &pol,
                },
                discount: pol.domain.model().discount,
                running: (0.0, 0.0, 1.0, 0),
                trials: Vec::new(),
                ask_action: aug.model.ask_action(),
                c_ask: -1.0,
                bad_ask_reward: 0,
            };
            let recs = Simulation::new(&cfg, &pol, sim)
                .unwrap()
                .run(&mut ledger)
                .unwrap();
            let same = recs
                .iter()
                .zip(&ledger.trials)
                .all(|(r, &(d, u, steps, asks))| {
                    r.discounted_reward == d
                        && r.undiscounted_reward == u
                        && r.steps == steps
                        && r.asks == asks
                });
            if !same || recs.len() != ledger.trials.len() || ledger.bad_ask_reward > 0 {
                problems.push(format!(
                    "accounting mismatch in simulation {sim} under {limit:?}"
                ));
            }
        }
    }
    Ok((
        problems.is_empty(),
        if problems.is_empty() {
            format!("reruns identical; {checked_trials} trials within budget; step rewards sum exactly to records")
        } else {
            problems.join("; ")
        },
    ))
}

// ---------------------------------------------------------------------------

fn cache_root() -> PathBuf {
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-policies");
    std::fs::create_dir_all(&root).unwrap();
    root
}

fn main() {
    // libtest-style arguments such as --list or a filter are ignored except
    // for listing, so `cargo test -- --list` stays quiet.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut lab = Lab {
        root: cache_root(),
        cache: HashMap::new(),
    };
    let criteria: [(&str, fn(&mut Lab) -> Outcome); 11] = [
        ("softmax fidelity", softmax_fidelity),
        ("mixing time", mixing_time),
        ("joint update oracle", joint_update_oracle),
        ("solver soundness", solver_soundness),
        ("type inference", type_inference),
        ("ranking", ranking),
        ("dynamic adaptation", dynamic_adaptation),
        ("ask economics", ask_economics),
        ("ask suppression", ask_suppression),
        ("heuristic robustness", heuristic_robustness),
        ("determinism and accounting", determinism_and_accounting),
    ];
    let only: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let started = Instant::now();
        let (ok, detail) =
            match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| f(&mut lab))) {
                Ok(Ok(r)) => r,
                Ok(Err(e)) => (false, format!("error: {e}")),
                Err(_) => (false, "panicked".into()),
            };
        failed += usize::from(!ok);
        println!(
            "[{}] {name}: {detail} ({:.0} s)",
            if ok { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
