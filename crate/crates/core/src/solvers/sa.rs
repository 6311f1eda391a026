use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::state::Tracker;
use super::{check_budget, SolveError, SolveResult, Solver};
use crate::model::{Instance, Selection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationMode {
    /// Exactly this many cooling steps.
    Fixed(usize),
    /// Cool until the temperature drops to this value or below.
    Dynamic(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    /// Metropolis test against the current state.
    CurrentState,
    /// Metropolis test against the best score seen so far.
    GlobalBestBug,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardMode {
    /// Keep proposing until the neighbor is feasible.
    RetryLoop,
    /// Drop the step when the neighbor is infeasible.
    RejectAndContinue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    /// Flip one uniformly chosen variable. Under the retry guard further
    /// random flips accumulate on the neighbor until it is feasible.
    BitFlip,
    /// With probability one half add a random unselected variable when below
    /// the upper bound, otherwise remove a random selected one when above the
    /// lower bound.
    AddRemove,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaConfig {
    pub t0: f64,
    pub cooling: f64,
    pub iterations: IterationMode,
    pub acceptance: Acceptance,
    pub guard: GuardMode,
    pub moves: MoveKind,
    /// Proposals allowed per step under [`GuardMode::RetryLoop`].
    pub retry_cap: usize,
    /// Rejection-sampling attempts for the initial selection.
    pub init_cap: usize,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            t0: 1000.0,
            cooling: 0.99,
            iterations: IterationMode::Fixed(1000),
            acceptance: Acceptance::CurrentState,
            guard: GuardMode::RetryLoop,
            moves: MoveKind::BitFlip,
            retry_cap: 10_000,
            init_cap: 50_000,
        }
    }
}

impl SaConfig {
    pub fn global_best_bug() -> Self {
        SaConfig { acceptance: Acceptance::GlobalBestBug, ..SaConfig::default() }
    }

    /// Number of cooling steps this schedule performs, absent a budget cut.
    pub fn planned_steps(&self) -> usize {
        match self.iterations {
            IterationMode::Fixed(k) => k,
            IterationMode::Dynamic(t_min) => {
                let mut t = self.t0;
                let mut k = 0;
                while t > t_min && k < usize::MAX {
                    t *= self.cooling;
                    k += 1;
                }
                k
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulatedAnnealing {
    pub config: SaConfig,
}

impl SimulatedAnnealing {
    pub fn new(config: SaConfig) -> Self {
        SimulatedAnnealing { config }
    }
}

/// Random subsets of size drawn uniformly from `[L, min(U, n)]` until one is
/// feasible.
fn initial_selection(inst: &Instance, rng: &mut ChaCha8Rng, cap: usize) -> Option<Selection> {
    let n = inst.n();
    let (lo, hi) = inst.bounds();
    let hi = hi.min(n);
    if lo > hi {
        return None;
    }
    let mut t = Tracker::new(inst);
    for _ in 0..cap {
        let k = rng.gen_range(lo..=hi);
        let sel = Selection::new(sample(rng, n, k).into_vec());
        t.set(&sel);
        if t.feasible() {
            return Some(sel);
        }
    }
    None
}

fn propose(t: &mut Tracker, cfg: &SaConfig, rng: &mut ChaCha8Rng, flips: &mut Vec<usize>) -> bool {
    let n = t.n();
    let (lo, hi) = t.bounds();
    flips.clear();
    match cfg.moves {
        MoveKind::BitFlip if cfg.guard == GuardMode::RetryLoop => {
            // Random flips accumulate until the neighbor is feasible; only the
            // net change is then applied with full score bookkeeping.
            let mut walk = Vec::new();
            loop {
                let v = rng.gen_range(0..n);
                t.flip_constraints(v);
                walk.push(v);
                if t.feasible() || walk.len() >= cfg.retry_cap {
                    break;
                }
            }
            let feasible = t.feasible();
            for &v in walk.iter().rev() {
                t.flip_constraints(v);
            }
            if feasible {
                let mut odd = vec![false; n];
                for &v in &walk {
                    odd[v] = !odd[v];
                }
                for v in (0..n).filter(|&v| odd[v]) {
                    t.flip(v);
                    flips.push(v);
                }
            }
        }
        MoveKind::BitFlip => {
            let v = rng.gen_range(0..n);
            t.flip(v);
            flips.push(v);
        }
        MoveKind::AddRemove => {
            let attempts = if cfg.guard == GuardMode::RetryLoop { cfg.retry_cap } else { 1 };
            for _ in 0..attempts {
                undo(t, flips);
                let pick = |rng: &mut ChaCha8Rng, want: bool| {
                    let pool: Vec<usize> = (0..n).filter(|&i| t.mask[i] == want).collect();
                    pool[rng.gen_range(0..pool.len())]
                };
                let v = if rng.gen::<f64>() < 0.5 && t.size < hi {
                    pick(rng, false)
                } else if t.size > lo {
                    pick(rng, true)
                } else {
                    continue;
                };
                t.flip(v);
                flips.push(v);
                if t.feasible() {
                    break;
                }
            }
        }
    }
    if !flips.is_empty() && t.feasible() {
        true
    } else {
        undo(t, flips);
        false
    }
}

fn undo(t: &mut Tracker, flips: &mut Vec<usize>) {
    for &v in flips.iter().rev() {
        t.flip(v);
    }
    flips.clear();
}

impl Solver for SimulatedAnnealing {
    fn name(&self) -> String {
        match self.config.acceptance {
            Acceptance::CurrentState => "sa".into(),
            Acceptance::GlobalBestBug => "sa-bug".into(),
        }
    }

    fn solve(&self, inst: &Instance, budget_sec: f64, seed: u64) -> Result<SolveResult, SolveError> {
        check_budget(budget_sec)?;
        let cfg = &self.config;
        let start = Instant::now();
        let deadline = start + Duration::from_secs_f64(budget_sec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(init) = initial_selection(inst, &mut rng, cfg.init_cap) else {
            return Ok(SolveResult::infeasible(start.elapsed().as_secs_f64()));
        };
        let mut t = Tracker::new(inst);
        t.set(&init);
        let mut best = t.score;
        let mut best_sel = init;
        let mut trace = vec![(start.elapsed().as_secs_f64(), best)];
        let mut temp = cfg.t0;
        let mut flips = Vec::new();
        let mut step = 0usize;
        loop {
            let go_on = match cfg.iterations {
                IterationMode::Fixed(k) => step < k,
                IterationMode::Dynamic(t_min) => temp > t_min,
            };
            if !go_on || Instant::now() >= deadline {
                break;
            }
            step += 1;
            let current = t.score;
            if propose(&mut t, cfg, &mut rng, &mut flips) {
                let reference = match cfg.acceptance {
                    Acceptance::CurrentState => current,
                    Acceptance::GlobalBestBug => best,
                };
                let delta = t.score - reference;
                let accept = delta > 0.0 || rng.gen::<f64>() < (delta / temp).exp();
                if !accept {
                    undo(&mut t, &mut flips);
                } else if t.score > best {
                    best = t.score;
                    best_sel = t.selection();
                    trace.push((start.elapsed().as_secs_f64(), best));
                }
            }
            temp *= cfg.cooling;
        }
        let mut result = SolveResult::finish(inst, Some(best_sel), start);
        result.trace = trace;
        Ok(result)
    }
}
