use std::time::Instant;

use super::state::Tracker;
use super::{check_budget, SolveError, SolveResult, Solver};
use crate::model::{Instance, Selection};

pub const MAX_EXHAUSTIVE_N: usize = 24;
const TIE_EPS: f64 = 1e-9;

/// Enumerates every selection in Gray-code order.
///
/// Among selections whose scores agree within `1e-9` the lexicographically
/// smallest index list wins. The budget is ignored: enumeration always runs
/// to the end.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exhaustive;

/// True when the sorted index list of `a` precedes that of `b`.
fn lex_less(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    let i = diff.trailing_zeros();
    let above = |m: u32| if i >= 31 { 0 } else { m >> (i + 1) };
    if a & (1 << i) != 0 {
        above(b) != 0
    } else {
        above(a) == 0
    }
}

impl Solver for Exhaustive {
    fn name(&self) -> String {
        "exhaustive".into()
    }

    fn solve(&self, inst: &Instance, budget_sec: f64, _seed: u64) -> Result<SolveResult, SolveError> {
        check_budget(budget_sec)?;
        let n = inst.n();
        if n > MAX_EXHAUSTIVE_N {
            return Err(SolveError::TooLarge { n, max: MAX_EXHAUSTIVE_N });
        }
        let start = Instant::now();
        let mut t = Tracker::new(inst);
        let mut mask: u32 = 0;
        let mut best: Option<(f64, u32)> = None;
        let consider = |score: f64, mask: u32, best: &mut Option<(f64, u32)>| match *best {
            None => *best = Some((score, mask)),
            Some((b, bm)) => {
                if score > b + TIE_EPS || (score >= b - TIE_EPS && lex_less(mask, bm)) {
                    *best = Some((score.max(b), mask));
                }
            }
        };
        if t.feasible() {
            consider(t.score, mask, &mut best);
        }
        for k in 1u64..(1u64 << n) {
            let bit = k.trailing_zeros() as usize;
            t.flip(bit);
            mask ^= 1 << bit;
            if t.feasible() {
                consider(t.score, mask, &mut best);
            }
        }
        let sel = best.map(|(_, m)| Selection::new((0..n).filter(|&i| m & (1 << i) != 0).collect()));
        let mut result = SolveResult::finish(inst, sel, start);
        result.completed = Some(true);
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasibility, score};
    use crate::gen::{generate, Family, GenSpec};

    fn lex_oracle(a: u32, b: u32) -> bool {
        let list = |m: u32| (0..32).filter(|i| m & (1 << i) != 0).collect::<Vec<u32>>();
        list(a) < list(b)
    }

    #[test]
    fn lex_order_matches_vector_comparison() {
        for a in 0u32..64 {
            for b in 0u32..64 {
                assert_eq!(lex_less(a, b), lex_oracle(a, b), "{a:b} {b:b}");
            }
        }
    }

    /// Plain enumeration using the model functions only.
    fn brute(inst: &Instance) -> f64 {
        let n = inst.n();
        let mut best = f64::NEG_INFINITY;
        for m in 0u32..(1 << n) {
            let sel = Selection::new((0..n).filter(|&i| m & (1 << i) != 0).collect());
            if check_feasibility(inst, &sel).unwrap().feasible {
                best = best.max(score(inst, &sel).unwrap());
            }
        }
        best
    }

    #[test]
    fn matches_brute_force() {
        for fam in [Family::DenseDeceptive, Family::StructuralTrap, Family::LocalOptima] {
            let spec = GenSpec::new(fam).with_n_range(12, 14);
            for inst in generate(&spec, 4, 9).unwrap() {
                let r = Exhaustive.solve(&inst, 0.0, 0).unwrap();
                assert!((r.score - brute(&inst)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tie_goes_to_smallest_list() {
        use crate::model::*;
        use std::collections::BTreeMap;
        let inst = Instance::new(
            "t",
            "test",
            Requirements {
                n_variables: 3,
                cardinality_bounds: (1, 1),
                precedence: vec![],
                mutex: vec![],
                groups: BTreeMap::new(),
            },
            Catalog {
                variables: [1.0, 2.0, 2.0].iter().map(|&weight| Variable { weight }).collect(),
                interactions: Interactions::default(),
            },
        )
        .unwrap();
        let r = Exhaustive.solve(&inst, 0.0, 0).unwrap();
        assert_eq!(r.selection.unwrap().indices(), &[1]);
    }

    #[test]
    fn refuses_large_instances() {
        let spec = GenSpec::new(Family::RandomSds);
        let inst = &generate(&spec, 1, 1).unwrap()[0];
        assert!(matches!(Exhaustive.solve(inst, 1.0, 0), Err(SolveError::TooLarge { .. })));
    }
}
