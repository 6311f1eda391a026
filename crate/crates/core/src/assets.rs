//! Bundled candidate sources.

/// Annealing solver in the guarded, current-state-acceptance style: 1-flip
/// neighbors with a bounded feasibility retry loop, `T0 = 1000`, cooling
/// `0.99`, 1000 steps, best-so-far tracking. Reads the candidate stdin
/// payload and prints a selection. Seeded, so its output is deterministic.
pub const HERO_SA_PY: &str = include_str!("../assets/hero_sa.py");
