use std::time::{Duration, Instant};

use super::state::Tracker;
use super::{check_budget, SolveError, SolveResult, Solver};
use crate::model::{Instance, Selection};

const PRUNE_EPS: f64 = 1e-12;

/// Which optimistic bound prunes the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundMode {
    /// `S(x) + sum over undecided i of max(0, w_i + sum_{j in x} W_ij)`.
    ///
    /// Cheap, but it ignores positive couplings among undecided variables,
    /// so a closed search is only optimal relative to this bound.
    Linear,
    /// The linear bound plus each undecided variable's positive couplings to
    /// later undecided variables, keeping only the best `U - |x|` terms.
    /// Never undercuts the true completion value.
    #[default]
    Admissible,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BnbConfig {
    pub bound: BoundMode,
}

/// Depth-first branch and bound over variables ordered by interaction degree.
///
/// The include branch is explored first. Any node whose partial selection is
/// already feasible with all undecided variables left out is recorded as an
/// incumbent, which makes the search anytime. `completed` reports whether the
/// tree was exhausted before the budget ran out.
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchAndBound {
    pub config: BnbConfig,
}

impl BranchAndBound {
    pub fn new(config: BnbConfig) -> Self {
        BranchAndBound { config }
    }
}

/// Variables by number of distinct nonzero interaction partners, descending,
/// ties by index.
pub fn branching_order(inst: &Instance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..inst.n()).collect();
    let degree = |v: usize| inst.neighbors(v).iter().filter(|(_, w)| *w != 0.0).count();
    order.sort_by_key(|&v| (std::cmp::Reverse(degree(v)), v));
    order
}

#[derive(Clone, Copy)]
enum Stage {
    Enter,
    AfterInclude { applied: bool },
    AfterExclude,
}

#[derive(Clone, Copy)]
struct Frame {
    depth: usize,
    stage: Stage,
}

struct Search<'a> {
    t: Tracker<'a>,
    order: Vec<usize>,
    /// Decided as excluded.
    excluded: Vec<bool>,
    /// Positive couplings from `order[p]` to later positions.
    pos_after: Vec<f64>,
    mode: BoundMode,
    best: f64,
    best_sel: Option<Selection>,
    trace: Vec<(f64, f64)>,
    terms: Vec<f64>,
}

impl<'a> Search<'a> {
    fn bound(&mut self, depth: usize) -> f64 {
        let (_, hi) = self.t.bounds();
        self.terms.clear();
        for p in depth..self.order.len() {
            let v = self.order[p];
            if self.t.blocked_by_exclusion(v) || self.t.prereqs(v).iter().any(|&i| self.excluded[i]) {
                continue;
            }
            let mut term = self.t.link(v);
            if self.mode == BoundMode::Admissible {
                term += self.pos_after[p];
            }
            if term > 0.0 {
                self.terms.push(term);
            }
        }
        let room = hi.saturating_sub(self.t.size);
        if self.mode == BoundMode::Admissible && self.terms.len() > room {
            self.terms.sort_unstable_by(|a, b| b.total_cmp(a));
            self.terms.truncate(room);
        }
        self.t.score + self.terms.iter().sum::<f64>()
    }

    fn can_include(&self, v: usize) -> bool {
        self.t.can_add_ignoring_prereqs(v) && !self.t.prereqs(v).iter().any(|&i| self.excluded[i])
    }

    fn can_exclude(&self, v: usize) -> bool {
        !self.t.dependents(v).iter().any(|&j| self.t.mask[j])
    }
}

impl Solver for BranchAndBound {
    fn name(&self) -> String {
        "bnb".into()
    }

    fn solve(&self, inst: &Instance, budget_sec: f64, _seed: u64) -> Result<SolveResult, SolveError> {
        check_budget(budget_sec)?;
        let start = Instant::now();
        let deadline = start + Duration::from_secs_f64(budget_sec);
        let order = branching_order(inst);
        let n = order.len();
        let mut position = vec![0; n];
        for (p, &v) in order.iter().enumerate() {
            position[v] = p;
        }
        let pos_after = order
            .iter()
            .map(|&v| {
                inst.neighbors(v)
                    .iter()
                    .filter(|&&(j, w)| w > 0.0 && position[j] > position[v])
                    .map(|&(_, w)| w)
                    .sum()
            })
            .collect();
        let mut s = Search {
            t: Tracker::new(inst),
            order,
            excluded: vec![false; n],
            pos_after,
            mode: self.config.bound,
            best: f64::NEG_INFINITY,
            best_sel: None,
            trace: Vec::new(),
            terms: Vec::with_capacity(n),
        };
        let (lo, _) = inst.bounds();
        let mut stack = vec![Frame { depth: 0, stage: Stage::Enter }];
        let mut completed = true;

        while let Some(frame) = stack.last_mut() {
            let depth = frame.depth;
            match frame.stage {
                Stage::Enter => {
                    if Instant::now() >= deadline {
                        completed = false;
                        break;
                    }
                    if s.t.feasible() && s.t.score > s.best + PRUNE_EPS {
                        s.best = s.t.score;
                        s.best_sel = Some(s.t.selection());
                        s.trace.push((start.elapsed().as_secs_f64(), s.best));
                    }
                    let remaining = n - depth;
                    if depth == n || s.t.size + remaining < lo || s.bound(depth) <= s.best + PRUNE_EPS {
                        stack.pop();
                        continue;
                    }
                    let v = s.order[depth];
                    let applied = s.can_include(v);
                    frame.stage = Stage::AfterInclude { applied };
                    if applied {
                        s.t.flip(v);
                        stack.push(Frame { depth: depth + 1, stage: Stage::Enter });
                    }
                }
                Stage::AfterInclude { applied } => {
                    let v = s.order[depth];
                    if applied {
                        s.t.flip(v);
                    }
                    if s.can_exclude(v) {
                        frame.stage = Stage::AfterExclude;
                        s.excluded[v] = true;
                        stack.push(Frame { depth: depth + 1, stage: Stage::Enter });
                    } else {
                        stack.pop();
                    }
                }
                Stage::AfterExclude => {
                    let v = s.order[depth];
                    s.excluded[v] = false;
                    stack.pop();
                }
            }
        }
        let mut result = SolveResult::finish(inst, s.best_sel, start);
        result.trace = s.trace;
        result.completed = Some(completed);
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, Family, GenSpec};
    use crate::solvers::Exhaustive;

    #[test]
    fn order_by_degree() {
        let insts = generate(&GenSpec::new(Family::TreeStructured), 1, 1).unwrap();
        let inst = &insts[0];
        let order = branching_order(inst);
        let deg = |v: usize| inst.neighbors(v).len();
        assert!(order.windows(2).all(|w| deg(w[0]) >= deg(w[1])));
    }

    #[test]
    fn linear_bound_can_miss_positive_couplings() {
        use crate::model::*;
        use std::collections::BTreeMap;
        let inst = Instance::new(
            "b",
            "test",
            Requirements {
                n_variables: 2,
                cardinality_bounds: (0, 2),
                precedence: vec![],
                mutex: vec![],
                groups: BTreeMap::new(),
            },
            Catalog {
                variables: [-1.0, -1.0].iter().map(|&weight| Variable { weight }).collect(),
                interactions: Interactions::from_entries([(0, 1, 10.0)]).unwrap(),
            },
        )
        .unwrap();
        let exact = Exhaustive.solve(&inst, 10.0, 0).unwrap();
        assert_eq!(exact.score, 8.0);
        let adm = BranchAndBound::default().solve(&inst, 10.0, 0).unwrap();
        assert_eq!(adm.score, 8.0);
        let lin = BranchAndBound::new(BnbConfig { bound: BoundMode::Linear }).solve(&inst, 10.0, 0).unwrap();
        assert_eq!(lin.completed, Some(true));
        assert!(lin.score < exact.score);
    }

    #[test]
    fn trace_is_monotone() {
        let insts = generate(&GenSpec::new(Family::BnbShowcase).with_n_range(12, 16), 3, 4).unwrap();
        for inst in &insts {
            let r = BranchAndBound::default().solve(inst, 5.0, 0).unwrap();
            assert!(r.trace.windows(2).all(|w| w[1].1 > w[0].1 && w[1].0 >= w[0].0));
            assert_eq!(r.completed, Some(true));
        }
    }

    #[test]
    fn zero_budget_stops_immediately() {
        let insts = generate(&GenSpec::new(Family::DenseDeceptive), 1, 2).unwrap();
        let r = BranchAndBound::default().solve(&insts[0], 0.0, 0).unwrap();
        assert_eq!(r.completed, Some(false));
    }
}
