//! Toolkit for binary selection problems with pairwise interactions and
//! side constraints: instance model, generator, reference solvers, a
//! sandbox for untrusted candidate programs, reward shaping, evaluation
//! metrics and a heuristic audit of annealing-style candidate code.

pub mod assets;
pub mod audit;
pub mod eval;
pub mod gen;
pub mod model;
pub mod pool;
pub mod reward;
pub mod sandbox;
pub mod solvers;

pub use model::{check_feasibility, score, CoreError, FeasibilityReport, Instance, Selection};
