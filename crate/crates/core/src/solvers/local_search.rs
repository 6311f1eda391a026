use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::state::Tracker;
use super::{check_budget, SolveError, SolveResult, Solver};
use crate::model::{Instance, Selection};

/// Accepted improving moves per restart.
pub const MAX_MOVES: usize = 2000;
const MIN_GAIN: f64 = 1e-12;

/// Multi-start best-improvement 1-flip hill climbing.
///
/// Each restart builds a random maximal feasible selection from a shuffled
/// order, then applies the best feasibility-preserving flip until no flip
/// gains more than `1e-12` or [`MAX_MOVES`] moves were taken. The number of
/// restarts is `max(1, round(10 * budget_sec))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalSearch;

pub fn restarts_for_budget(budget_sec: f64) -> usize {
    ((20.0 * budget_sec / 2.0).round() as usize).max(1)
}

impl Solver for LocalSearch {
    fn name(&self) -> String {
        "ls".into()
    }

    fn solve(&self, inst: &Instance, budget_sec: f64, seed: u64) -> Result<SolveResult, SolveError> {
        check_budget(budget_sec)?;
        let start = Instant::now();
        let deadline = start + Duration::from_secs_f64(budget_sec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Tracker::new(inst);
        let mut order: Vec<usize> = (0..inst.n()).collect();
        let mut best: Option<(f64, Selection)> = None;
        let mut trace = Vec::new();
        let (lo, _) = inst.bounds();

        for restart in 0..restarts_for_budget(budget_sec) {
            if restart > 0 && Instant::now() >= deadline {
                break;
            }
            t.clear();
            order.shuffle(&mut rng);
            let mut grew = true;
            while grew {
                grew = false;
                for &v in &order {
                    if t.can_add(v) {
                        t.flip(v);
                        grew = true;
                    }
                }
            }
            if t.size < lo || !t.feasible() {
                continue;
            }
            for _ in 0..MAX_MOVES {
                if Instant::now() >= deadline {
                    break;
                }
                let mut pick: Option<(usize, f64)> = None;
                for v in 0..t.n() {
                    let allowed = if t.mask[v] { t.can_remove(v) } else { t.can_add(v) };
                    if !allowed {
                        continue;
                    }
                    let g = t.gain(v);
                    if g > MIN_GAIN && pick.map_or(true, |(_, pg)| g > pg) {
                        pick = Some((v, g));
                    }
                }
                match pick {
                    Some((v, _)) => t.flip(v),
                    None => break,
                }
            }
            if best.as_ref().map_or(true, |(b, _)| t.score > *b) {
                best = Some((t.score, t.selection()));
                trace.push((start.elapsed().as_secs_f64(), t.score));
            }
        }
        let mut result = SolveResult::finish(inst, best.map(|(_, s)| s), start);
        result.trace = trace;
        Ok(result)
    }
}
