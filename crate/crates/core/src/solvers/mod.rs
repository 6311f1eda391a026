//! Reference solvers sharing one calling convention.
//!
//! Every solver takes an instance, a wall-clock budget in seconds and a seed,
//! and returns a [`SolveResult`]. A run that ends without a feasible
//! selection reports a score of negative infinity.

mod bnb;
mod exhaustive;
mod greedy;
mod local_search;
mod sa;
pub(crate) mod state;

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::model::{check_feasibility, score, Instance, Selection};

pub use bnb::{BnbConfig, BoundMode, BranchAndBound};
pub use exhaustive::{Exhaustive, MAX_EXHAUSTIVE_N};
pub use greedy::Greedy;
pub use local_search::LocalSearch;
pub use sa::{Acceptance, GuardMode, IterationMode, MoveKind, SaConfig, SimulatedAnnealing};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("exhaustive search refuses n = {n} (limit {max})")]
    TooLarge { n: usize, max: usize },
    #[error("budget must be finite and non-negative, got {0}")]
    BadBudget(f64),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub selection: Option<Selection>,
    /// Objective of `selection`, or negative infinity when none was found.
    pub score: f64,
    pub feasible: bool,
    pub elapsed_sec: f64,
    /// Anytime trace of `(elapsed_sec, best_score)` improvements.
    pub trace: Vec<(f64, f64)>,
    /// Set by exhaustive-style methods: whether the search space was closed.
    pub completed: Option<bool>,
}

impl SolveResult {
    /// Build a result from a final selection, recomputing score and
    /// feasibility with the model so every method is judged the same way.
    pub(crate) fn finish(inst: &Instance, sel: Option<Selection>, start: Instant) -> SolveResult {
        let elapsed_sec = start.elapsed().as_secs_f64();
        let checked = sel.and_then(|s| {
            let report = check_feasibility(inst, &s).ok()?;
            report.feasible.then_some(s)
        });
        match checked {
            Some(s) => SolveResult {
                score: score(inst, &s).expect("selection validated"),
                selection: Some(s),
                feasible: true,
                elapsed_sec,
                trace: Vec::new(),
                completed: None,
            },
            None => SolveResult::infeasible(elapsed_sec),
        }
    }

    pub fn infeasible(elapsed_sec: f64) -> SolveResult {
        SolveResult {
            selection: None,
            score: f64::NEG_INFINITY,
            feasible: false,
            elapsed_sec,
            trace: Vec::new(),
            completed: None,
        }
    }
}

pub trait Solver: Send + Sync {
    fn name(&self) -> String;
    fn solve(&self, inst: &Instance, budget_sec: f64, seed: u64) -> Result<SolveResult, SolveError>;
}

pub(crate) fn check_budget(budget_sec: f64) -> Result<(), SolveError> {
    if budget_sec.is_finite() && budget_sec >= 0.0 {
        Ok(())
    } else {
        Err(SolveError::BadBudget(budget_sec))
    }
}

/// Resolve a built-in method name to a solver.
pub fn builtin(name: &str) -> Result<Box<dyn Solver>, SolveError> {
    Ok(match name {
        "greedy" => Box::new(Greedy),
        "ls" => Box::new(LocalSearch),
        "bnb" => Box::new(BranchAndBound::default()),
        "sa" => Box::new(SimulatedAnnealing::new(SaConfig::default())),
        "sa-bug" => Box::new(SimulatedAnnealing::new(SaConfig::global_best_bug())),
        "exhaustive" => Box::new(Exhaustive),
        other => return Err(SolveError::UnknownMethod(other.to_string())),
    })
}

pub const BUILTIN_METHODS: [&str; 6] = ["greedy", "ls", "bnb", "sa", "sa-bug", "exhaustive"];
