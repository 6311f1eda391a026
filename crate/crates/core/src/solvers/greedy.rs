use std::time::Instant;

use super::state::Tracker;
use super::{check_budget, SolveError, SolveResult, Solver};
use crate::model::Instance;

/// Two-phase marginal-gain greedy.
///
/// Phase one repeatedly adds the variable with the largest positive marginal
/// gain whose addition keeps every constraint but the lower bound, breaking
/// ties toward the lowest index. Phase two tops the selection up to the lower
/// bound with the best remaining feasibility-preserving variable, whatever
/// its sign.
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl Solver for Greedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn solve(&self, inst: &Instance, budget_sec: f64, _seed: u64) -> Result<SolveResult, SolveError> {
        check_budget(budget_sec)?;
        let start = Instant::now();
        let mut t = Tracker::new(inst);
        let (lo, _) = inst.bounds();
        while let Some(v) = best_addition(&t, true) {
            t.flip(v);
        }
        while t.size < lo {
            match best_addition(&t, false) {
                Some(v) => t.flip(v),
                None => break,
            }
        }
        Ok(SolveResult::finish(inst, Some(t.selection()), start))
    }
}

fn best_addition(t: &Tracker, positive_only: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for v in 0..t.n() {
        if !t.can_add(v) {
            continue;
        }
        let g = t.gain(v);
        if positive_only && g <= 0.0 {
            continue;
        }
        if best.map_or(true, |(_, bg)| g > bg) {
            best = Some((v, g));
        }
    }
    best.map(|(v, _)| v)
}
