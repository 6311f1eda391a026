//! Hierarchical reward for generated solver programs.
//!
//! A sample earns `0.10 * format + 0.20 * exec + 0.70 * nominal`. The format
//! term checks the `<think>`/`<code>` layout, the execution term shapes
//! towards runnable, schema-conforming, constraint-respecting code, and the
//! nominal term is the normalized objective behind a feasibility gate.
//! Optional variants: soft gate, greedy anchoring, group diversity penalty,
//! a minimal three-tier execution reward and an alternative normalizer.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::model::Instance;
use crate::sandbox::{CandidateRun, Outcome};

/// Degeneracy threshold used by the normalizer.
pub const EPS: f64 = 1e-9;

pub const GRAPH_KEYWORDS: [&str; 14] = [
    "networkx",
    "adjacency",
    "neighbor",
    "interactions",
    "precedence",
    "mutex",
    "recursion",
    "memoization",
    "backtrack",
    "graph",
    "edge",
    "vertex",
    "topological",
    "dag",
];

pub const LAZY_SORT_PENALTY: f64 = 0.2;
pub const SOFT_GATE_PENALTY: f64 = 0.15;

/// Normalized training progress in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TrainingProgress(f64);

impl TrainingProgress {
    pub fn new(t: f64) -> Self {
        TrainingProgress(if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) })
    }

    pub fn from_steps(step: u64, total: u64) -> Self {
        TrainingProgress::new(if total == 0 { 1.0 } else { step as f64 / total as f64 })
    }

    pub fn t(self) -> f64 {
        self.0
    }

    /// Structure-bonus scale: full before 40% progress, one fifth after.
    pub fn alpha(self) -> f64 {
        if self.0 < 0.4 {
            1.0
        } else {
            0.2
        }
    }
}

fn tag_positions(text: &str, tag: &str) -> Vec<usize> {
    text.match_indices(tag).map(|(i, _)| i).collect()
}

/// 1 when the text has exactly one think block followed by exactly one code
/// block, otherwise 0.
pub fn format_reward(text: &str) -> f64 {
    let open_t = tag_positions(text, "<think>");
    let close_t = tag_positions(text, "</think>");
    let open_c = tag_positions(text, "<code>");
    let close_c = tag_positions(text, "</code>");
    if [&open_t, &close_t, &open_c, &close_c].iter().any(|v| v.len() != 1) {
        return 0.0;
    }
    let ordered = open_t[0] < close_t[0] && close_t[0] <= open_c[0] && open_c[0] < close_c[0];
    if ordered {
        1.0
    } else {
        0.0
    }
}

pub fn structure_indicator(code: &str) -> bool {
    let lower = code.to_lowercase();
    GRAPH_KEYWORDS.iter().any(|k| lower.contains(k))
}

/// Sorting by weight while never touching the interaction terms.
pub fn lazy_sort_flag(code: &str) -> bool {
    let lower = code.to_lowercase();
    lower.contains("sorted") && lower.contains("weight") && !lower.contains("interactions")
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecComponents {
    pub r_syntax: f64,
    pub r_schema: f64,
    pub r_structure: f64,
    pub r_feasibility: f64,
    /// Zero or minus [`LAZY_SORT_PENALTY`].
    pub lazy_penalty: f64,
    pub r_exec: f64,
}

pub fn feasibility_term(n_vio: usize) -> f64 {
    if n_vio == 0 {
        0.3
    } else {
        -(0.03 * n_vio as f64).min(0.2)
    }
}

/// Execution reward of one sandbox run. Runs that failed to execute
/// (timeout, syntax or runtime error) earn exactly zero. A run whose output
/// could not be parsed into a selection gets no schema or feasibility term.
pub fn exec_reward(run: &CandidateRun, code: &str, progress: TrainingProgress) -> ExecComponents {
    if !run.outcome.executed() {
        return ExecComponents::default();
    }
    let parsed = run.selection.is_some();
    let r_syntax = 0.1;
    let r_schema = if parsed { 0.1 } else { 0.0 };
    let r_structure = 0.2 * progress.alpha() * if structure_indicator(code) { 1.0 } else { 0.0 };
    let r_feasibility = if parsed { feasibility_term(run.n_vio) } else { 0.0 };
    let lazy_penalty = if lazy_sort_flag(code) { -LAZY_SORT_PENALTY } else { 0.0 };
    ExecComponents {
        r_syntax,
        r_schema,
        r_structure,
        r_feasibility,
        lazy_penalty,
        r_exec: r_syntax + r_schema + r_structure + r_feasibility + lazy_penalty,
    }
}

/// Three-tier execution reward of the reduced-scaffold variant.
pub fn minimal_feasibility_reward(run: &CandidateRun) -> f64 {
    match run.outcome {
        Outcome::Valid => 1.0,
        Outcome::ConstraintViolation => 0.5,
        Outcome::JsonParseError => 0.1,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Interaction estimate: mean positive interaction times the pair budget.
    #[default]
    MeanPositive,
    /// Interaction estimate: sum of the largest positive interactions within
    /// the pair budget.
    TopPositive,
}

/// Positive-weight and positive-interaction ceilings `(W_max, I_max)`.
pub fn normalization_baseline(inst: &Instance, variant: Normalization) -> (f64, f64) {
    let (_, hi) = inst.bounds();
    let mut pos_w: Vec<f64> = inst.weights().filter(|&w| w > 0.0).collect();
    pos_w.sort_by(|a, b| b.total_cmp(a));
    let w_max: f64 = pos_w.iter().take(hi).sum();
    let mut pos_i: Vec<f64> = inst.catalog.interactions.0.values().copied().filter(|&v| v > 0.0).collect();
    let pairs = hi.saturating_mul(hi.saturating_sub(1)) / 2;
    let i_max = if pos_i.is_empty() {
        0.0
    } else {
        match variant {
            Normalization::MeanPositive => {
                let mean = pos_i.iter().sum::<f64>() / pos_i.len() as f64;
                mean * pos_i.len().min(pairs) as f64
            }
            Normalization::TopPositive => {
                pos_i.sort_by(|a, b| b.total_cmp(a));
                pos_i.iter().take(pairs).sum()
            }
        }
    };
    (w_max, i_max)
}

/// Map a raw objective value onto a roughly unit scale. Not clamped.
pub fn normalize_score(inst: &Instance, s: f64) -> f64 {
    normalize_score_with(inst, s, Normalization::MeanPositive)
}

pub fn normalize_score_with(inst: &Instance, s: f64, variant: Normalization) -> f64 {
    let abs_w: f64 = inst.weights().map(f64::abs).sum();
    let abs_i: f64 = inst.catalog.interactions.0.values().map(|v| v.abs()).sum();
    if abs_w > EPS || abs_i > EPS {
        let (w_max, i_max) = normalization_baseline(inst, variant);
        let b = w_max + i_max;
        if b > EPS {
            s / b
        } else {
            s / (abs_w + abs_i).max(1.0)
        }
    } else {
        degenerate_normalize(s)
    }
}

/// Squashing used when the objective has no weights or interactions at all.
pub fn degenerate_normalize(s: f64) -> f64 {
    if s.abs() > EPS {
        0.5 * (1.0 + s / (1.0 + s.abs()))
    } else {
        0.5
    }
}

/// Clamped score minus a unit penalty whenever any constraint is broken.
pub fn intermediate_score(normalized: f64, n_vio: usize) -> f64 {
    (normalized - (n_vio as f64).min(1.0)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    #[default]
    Hard,
    Soft,
}

/// Gated nominal reward from an already normalized score.
pub fn gated_nominal(normalized: f64, n_vio: usize, gate: Gate) -> f64 {
    match gate {
        Gate::Hard if n_vio > 0 => 0.0,
        Gate::Hard => normalized.clamp(0.0, 1.0),
        Gate::Soft => (normalized - SOFT_GATE_PENALTY * n_vio as f64).clamp(0.0, 1.0),
    }
}

/// Nominal reward of a sandbox run. A run without a parsed selection earns 0
/// under either gate.
pub fn nominal_reward(inst: &Instance, run: &CandidateRun, gate: Gate, variant: Normalization) -> f64 {
    match (&run.selection, run.score) {
        (Some(_), Some(s)) => gated_nominal(normalize_score_with(inst, s, variant), run.n_vio, gate),
        _ => 0.0,
    }
}

/// Piecewise bonus for beating the greedy baseline by `delta` in normalized
/// score.
pub fn oracle_anchor_reward(delta: f64) -> f64 {
    if delta > 0.001 {
        1.0 + 10.0 * delta
    } else if delta < -0.001 {
        -0.5
    } else {
        0.0
    }
}

pub fn anchor_delta(inst: &Instance, candidate: f64, greedy: f64) -> f64 {
    normalize_score(inst, candidate) - normalize_score(inst, greedy)
}

fn four_grams(code: &str) -> HashSet<Vec<&str>> {
    let tokens: Vec<&str> = code.split_whitespace().collect();
    if tokens.is_empty() {
        HashSet::new()
    } else if tokens.len() < 4 {
        HashSet::from([tokens])
    } else {
        tokens.windows(4).map(<[&str]>::to_vec).collect()
    }
}

pub fn jaccard<T: Eq + std::hash::Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Mean whitespace-token 4-gram Jaccard similarity of each code to the rest
/// of its group. A singleton group gets 0.
pub fn diversity_penalty(group: &[&str]) -> Vec<f64> {
    if group.len() < 2 {
        return vec![0.0; group.len()];
    }
    let grams: Vec<_> = group.iter().map(|c| four_grams(c)).collect();
    (0..grams.len())
        .map(|i| {
            let total: f64 = (0..grams.len()).filter(|&j| j != i).map(|j| jaccard(&grams[i], &grams[j])).sum();
            total / (grams.len() - 1) as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub format: f64,
    pub exec: f64,
    pub nominal: f64,
    pub diversity: f64,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        CompositeWeights { format: 0.10, exec: 0.20, nominal: 0.70, diversity: 0.0 }
    }
}

impl CompositeWeights {
    /// The diversity variant moves 0.10 of nominal weight onto the penalty.
    pub fn with_diversity() -> Self {
        CompositeWeights { nominal: 0.60, diversity: 0.10, ..Default::default() }
    }

    pub fn combine(&self, r_format: f64, r_exec: f64, r_nominal: f64, r_diversity: f64) -> f64 {
        self.format * r_format + self.exec * r_exec + self.nominal * r_nominal - self.diversity * r_diversity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    #[default]
    Scaffolded,
    Minimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub weights: CompositeWeights,
    pub gate: Gate,
    pub normalization: Normalization,
    pub exec_mode: ExecMode,
    /// Add the greedy anchor to the execution term.
    pub anchor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_format: f64,
    pub r_syntax: f64,
    pub r_schema: f64,
    pub r_structure: f64,
    pub r_feasibility: f64,
    pub lazy_penalty: f64,
    pub r_exec: f64,
    pub r_nominal: f64,
    pub intermediate_score: f64,
    pub r_anchor: Option<f64>,
    pub r_diversity: Option<f64>,
    pub composite: f64,
    pub gate: Gate,
    pub progress_t: f64,
    pub outcome: Option<Outcome>,
    pub n_vio: usize,
}

/// Everything the reward needs about one sample besides the config.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub text: &'a str,
    /// Extracted program, if any.
    pub code: Option<&'a str>,
    /// Sandbox result for `code`, if it was run.
    pub run: Option<&'a CandidateRun>,
    pub instance: &'a Instance,
    pub progress: TrainingProgress,
    /// Greedy objective on the instance, used by anchoring.
    pub greedy_score: Option<f64>,
    /// Precomputed group diversity penalty.
    pub diversity: Option<f64>,
}

pub fn compute_reward(sample: &Sample, cfg: &RewardConfig) -> RewardBreakdown {
    let r_format = format_reward(sample.text);
    let code = sample.code.unwrap_or("");
    let exec = match (sample.run, cfg.exec_mode) {
        (Some(run), ExecMode::Scaffolded) => exec_reward(run, code, sample.progress),
        (Some(run), ExecMode::Minimal) => ExecComponents { r_exec: minimal_feasibility_reward(run), ..Default::default() },
        (None, _) => ExecComponents::default(),
    };
    let (r_nominal, intermediate, n_vio) = match sample.run {
        Some(run) => {
            let nominal = nominal_reward(sample.instance, run, cfg.gate, cfg.normalization);
            let inter = match run.score {
                Some(s) if run.selection.is_some() => {
                    intermediate_score(normalize_score_with(sample.instance, s, cfg.normalization), run.n_vio)
                }
                _ => 0.0,
            };
            (nominal, inter, run.n_vio)
        }
        None => (0.0, 0.0, 0),
    };
    let r_anchor = if cfg.anchor {
        let delta = match (sample.run.and_then(|r| r.score.filter(|_| r.feasible())), sample.greedy_score) {
            (Some(s), Some(g)) if g.is_finite() => anchor_delta(sample.instance, s, g),
            (Some(_), _) => 0.0,
            (None, _) => -1.0,
        };
        Some(oracle_anchor_reward(delta))
    } else {
        None
    };
    let r_diversity = if cfg.weights.diversity > 0.0 { Some(sample.diversity.unwrap_or(0.0)) } else { sample.diversity };
    let composite = cfg.weights.combine(
        r_format,
        exec.r_exec + r_anchor.unwrap_or(0.0),
        r_nominal,
        r_diversity.unwrap_or(0.0),
    );
    RewardBreakdown {
        r_format,
        r_syntax: exec.r_syntax,
        r_schema: exec.r_schema,
        r_structure: exec.r_structure,
        r_feasibility: exec.r_feasibility,
        lazy_penalty: exec.lazy_penalty,
        r_exec: exec.r_exec,
        r_nominal,
        intermediate_score: intermediate,
        r_anchor,
        r_diversity,
        composite,
        gate: cfg.gate,
        progress_t: sample.progress.t(),
        outcome: sample.run.map(|r| r.outcome),
        n_vio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_cases() {
        assert_eq!(format_reward("<think>a</think><code>b</code>"), 1.0);
        assert_eq!(format_reward("<code>b</code><think>a</think>"), 0.0);
        assert_eq!(format_reward("<think>a</think><code>b</code><code>c</code>"), 0.0);
        assert_eq!(format_reward("<think>a</think>"), 0.0);
        assert_eq!(format_reward("x <think>a</think>\n\n<code>b</code> y"), 1.0);
    }

    #[test]
    fn keyword_detection() {
        assert!(structure_indicator("use a MUTEX here"));
        assert!(!structure_indicator("print(1)"));
        assert!(lazy_sort_flag("sorted(items, key=lambda v: v['weight'])"));
        assert!(!lazy_sort_flag("sorted(weight) interactions"));
        assert_eq!((structure_indicator(""), lazy_sort_flag("")), (false, false));
    }

    #[test]
    fn progress_clamps() {
        assert_eq!(TrainingProgress::new(-1.0).t(), 0.0);
        assert_eq!(TrainingProgress::new(7.0).t(), 1.0);
        assert_eq!(TrainingProgress::from_steps(2, 5).t(), 0.4);
        assert_eq!(TrainingProgress::new(0.399).alpha(), 1.0);
        assert_eq!(TrainingProgress::new(0.4).alpha(), 0.2);
    }

    #[test]
    fn diversity_examples() {
        let a = "for i in range ( n ) : x += 1";
        let b = "completely other tokens that never overlap with anything";
        assert_eq!(diversity_penalty(&[a, a]), vec![1.0, 1.0]);
        assert_eq!(diversity_penalty(&[a, b]), vec![0.0, 0.0]);
        assert_eq!(diversity_penalty(&[a, a, b]), vec![0.5, 0.5, 0.0]);
        assert_eq!(diversity_penalty(&[a]), vec![0.0]);
        assert_eq!(diversity_penalty(&["x y", "x y"]), vec![1.0, 1.0]);
    }

    #[test]
    fn anchor_pieces() {
        assert!((oracle_anchor_reward(0.05) - 1.5).abs() < 1e-12);
        assert_eq!(oracle_anchor_reward(0.0), 0.0);
        assert_eq!(oracle_anchor_reward(0.001), 0.0);
        assert_eq!(oracle_anchor_reward(-0.001), 0.0);
        assert_eq!(oracle_anchor_reward(-0.1), -0.5);
    }
}
