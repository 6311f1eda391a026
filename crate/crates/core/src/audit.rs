//! Static, heuristic audit of annealing-style candidate code.
//!
//! Everything here is pattern matching over source text, not program
//! analysis: results describe what the code looks like, not what it does.
//! The regular expressions live in `data/audit_patterns.json` and can be
//! swapped for another language's surface syntax with [`Auditor::from_json`].
//!
//! Before matching, comments are stripped and physical lines are joined into
//! logical lines (backslash continuations and open brackets), so every
//! pattern sees a whole statement on one line.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_PATTERNS: &str = include_str!("../data/audit_patterns.json");

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("bad pattern file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad pattern {pattern:?}: {source}")]
    Regex { pattern: String, source: regex::Error },
}

/// Pattern file layout. A detector is a list of alternatives; an
/// alternative matches when all of its patterns match somewhere in the code.
/// `{NAME}` in a pattern expands to `macros[NAME]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternSet {
    #[serde(default)]
    pub macros: BTreeMap<String, String>,
    pub temperature: Vec<Vec<String>>,
    pub cooling: Vec<Vec<String>>,
    pub metropolis: Vec<Vec<String>>,
    pub exp_call: String,
    pub best_name: String,
    pub candidate_name: String,
    pub guard: Vec<Vec<String>>,
    pub best_tracking: Vec<Vec<String>>,
    pub two_way_moves: Vec<Vec<String>>,
    /// Each pattern's first capture group is the value.
    pub t0: Vec<String>,
    pub alpha: Vec<String>,
    pub iterations: Vec<String>,
    pub dynamic: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
struct Detector(Vec<Vec<Regex>>);

impl Detector {
    fn matches(&self, text: &str) -> bool {
        self.0.iter().any(|alt| alt.iter().all(|re| re.is_match(text)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcceptanceKind {
    CurrentState,
    GlobalBest,
    Mixed,
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralBucket {
    BestBug,
    AmbiguousAcceptance,
    CurrentOkNoGuard,
    CurrentOkNoBestTracking,
    CurrentOkGuardedButWeakMoves,
    CurrentOkStructurallyComplete,
}

impl StructuralBucket {
    pub const ALL: [StructuralBucket; 6] = [
        StructuralBucket::BestBug,
        StructuralBucket::AmbiguousAcceptance,
        StructuralBucket::CurrentOkNoGuard,
        StructuralBucket::CurrentOkNoBestTracking,
        StructuralBucket::CurrentOkGuardedButWeakMoves,
        StructuralBucket::CurrentOkStructurallyComplete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StructuralBucket::BestBug => "best_bug",
            StructuralBucket::AmbiguousAcceptance => "ambiguous_acceptance",
            StructuralBucket::CurrentOkNoGuard => "current_ok_no_guard",
            StructuralBucket::CurrentOkNoBestTracking => "current_ok_no_best_tracking",
            StructuralBucket::CurrentOkGuardedButWeakMoves => "current_ok_guarded_but_weak_moves",
            StructuralBucket::CurrentOkStructurallyComplete => "current_ok_structurally_complete",
        }
    }
}

/// The code lacks a temperature, a cooling update or an exponential
/// acceptance test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("code is not annealing-like")]
pub struct NotSaLike;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TemplateMatch {
    pub matched: bool,
    pub guard: bool,
    pub metropolis: bool,
    pub t0: Option<f64>,
    pub alpha: Option<f64>,
    pub iterations: Option<u64>,
    pub dynamic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub sa_like: bool,
    pub acceptance: AcceptanceKind,
    pub guard: bool,
    pub best_tracking: bool,
    pub two_way_moves: bool,
    pub bucket: Option<StructuralBucket>,
    pub template: TemplateMatch,
    /// Always true: these are pattern heuristics, not proofs.
    pub heuristic: bool,
}

/// A name with optional call or subscript suffixes.
const OPERAND: &str = r"[\w\.]+(?:\([^()]*\)|\[[^\[\]]*\])*";

#[derive(Debug, Clone)]
pub struct Auditor {
    temperature: Detector,
    cooling: Detector,
    metropolis: Detector,
    exp_call: Regex,
    best_name: Regex,
    candidate_name: Regex,
    guard: Detector,
    best_tracking: Detector,
    two_way: Detector,
    t0: Vec<Regex>,
    alpha: Vec<Regex>,
    iterations: Vec<Regex>,
    dynamic: Detector,
    operands: Regex,
    single_var: Regex,
}

fn expand(pattern: &str, macros: &BTreeMap<String, String>) -> String {
    let mut out = pattern.to_string();
    for (k, v) in macros {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

impl Auditor {
    pub fn from_json(text: &str) -> Result<Auditor, AuditError> {
        Auditor::new(&serde_json::from_str(text)?)
    }

    pub fn new(p: &PatternSet) -> Result<Auditor, AuditError> {
        let one = |s: &str| {
            let pattern = expand(s, &p.macros);
            Regex::new(&pattern).map_err(|source| AuditError::Regex { pattern, source })
        };
        let many = |v: &[String]| v.iter().map(|s| one(s)).collect::<Result<Vec<_>, _>>();
        let det = |v: &[Vec<String>]| v.iter().map(|alt| many(alt)).collect::<Result<Vec<_>, _>>().map(Detector);
        Ok(Auditor {
            temperature: det(&p.temperature)?,
            cooling: det(&p.cooling)?,
            metropolis: det(&p.metropolis)?,
            exp_call: one(&p.exp_call)?,
            best_name: one(&p.best_name)?,
            candidate_name: one(&p.candidate_name)?,
            guard: det(&p.guard)?,
            best_tracking: det(&p.best_tracking)?,
            two_way: det(&p.two_way_moves)?,
            t0: many(&p.t0)?,
            alpha: many(&p.alpha)?,
            iterations: many(&p.iterations)?,
            dynamic: det(&p.dynamic)?,
            operands: Regex::new(&format!(r"^\(*\s*({OPERAND})\s*-\s*({OPERAND})\s*\)*\s*(?:/|$)")).expect("static regex"),
            single_var: Regex::new(r"^\(*\s*(\w+)\s*\)*\s*(?:/|$)").expect("static regex"),
        })
    }

    /// The auditor built from the bundled pattern file.
    pub fn builtin() -> &'static Auditor {
        static CELL: OnceLock<Auditor> = OnceLock::new();
        CELL.get_or_init(|| Auditor::from_json(DEFAULT_PATTERNS).expect("bundled patterns are valid"))
    }

    pub fn is_sa_like(&self, code: &str) -> bool {
        let text = logical_text(code);
        self.sa_like_text(&text)
    }

    fn sa_like_text(&self, text: &str) -> bool {
        self.temperature.matches(text) && self.cooling.matches(text) && self.metropolis.matches(text)
    }

    pub fn classify_acceptance(&self, code: &str) -> AcceptanceKind {
        self.acceptance_text(&logical_text(code))
    }

    fn acceptance_text(&self, text: &str) -> AcceptanceKind {
        let mut best = false;
        let mut current = false;
        for m in self.exp_call.find_iter(text) {
            let Some(arg) = balanced_argument(&text[m.end()..]) else { continue };
            for reference in self.references(arg.trim(), text) {
                if self.best_name.is_match(&reference) {
                    best = true;
                } else if !self.candidate_name.is_match(&reference) {
                    current = true;
                }
            }
        }
        match (best, current) {
            (true, true) => AcceptanceKind::Mixed,
            (true, false) => AcceptanceKind::GlobalBest,
            (false, true) => AcceptanceKind::CurrentState,
            (false, false) => AcceptanceKind::Unresolved,
        }
    }

    /// Names the neighbor is compared against inside one exponent.
    fn references(&self, arg: &str, text: &str) -> Vec<String> {
        let (negated, body) = match arg.strip_prefix('-') {
            Some(rest) => (true, rest.trim_start()),
            None => (false, arg),
        };
        let pick = |a: &str, b: &str| if negated { a.to_string() } else { b.to_string() };
        if let Some(c) = self.operands.captures(body) {
            return vec![pick(&c[1], &c[2])];
        }
        let Some(c) = self.single_var.captures(body) else { return Vec::new() };
        let name = regex::escape(&c[1]);
        let assign = Regex::new(&format!(r"\b{name}\s*=\s*(-?)\s*\(*\s*({OPERAND})\s*-\s*({OPERAND})"))
            .expect("escaped name");
        assign
            .captures_iter(text)
            .map(|d| {
                let flip = negated != (&d[1] == "-");
                if flip {
                    d[2].to_string()
                } else {
                    d[3].to_string()
                }
            })
            .collect()
    }

    pub fn structural_taxonomy(&self, code: &str) -> Result<StructuralBucket, NotSaLike> {
        let report = self.audit(code);
        report.bucket.ok_or(NotSaLike)
    }

    pub fn matches_sa_template(&self, code: &str) -> TemplateMatch {
        self.template_text(&logical_text(code))
    }

    fn template_text(&self, text: &str) -> TemplateMatch {
        let first = |res: &[Regex]| {
            res.iter().find_map(|re| re.captures(text).and_then(|c| c.get(1)).map(|m| m.as_str().replace('_', "")))
        };
        let t0 = first(&self.t0).and_then(|s| s.parse::<f64>().ok());
        let alpha = first(&self.alpha).and_then(|s| s.parse::<f64>().ok());
        let iterations = first(&self.iterations).and_then(|s| s.parse::<u64>().ok());
        let dynamic = self.dynamic.matches(text);
        let guard = self.guard.matches(text);
        let metropolis = self.metropolis.matches(text);
        let matched = guard
            && metropolis
            && t0.is_some_and(|t| t >= 100.0)
            && alpha.is_some_and(|a| (0.8..1.0).contains(&a))
            && (iterations.is_some_and(|k| k >= 100) || dynamic);
        TemplateMatch { matched, guard, metropolis, t0, alpha, iterations, dynamic }
    }

    /// Every detector at once. `bucket` is `None` for code that is not
    /// annealing-like.
    pub fn audit(&self, code: &str) -> AuditReport {
        let text = logical_text(code);
        let sa_like = self.sa_like_text(&text);
        let acceptance = self.acceptance_text(&text);
        let guard = self.guard.matches(&text);
        let best_tracking = self.best_tracking.matches(&text);
        let two_way_moves = self.two_way.matches(&text);
        let bucket = sa_like.then(|| match acceptance {
            AcceptanceKind::GlobalBest => StructuralBucket::BestBug,
            AcceptanceKind::Mixed | AcceptanceKind::Unresolved => StructuralBucket::AmbiguousAcceptance,
            AcceptanceKind::CurrentState if !guard => StructuralBucket::CurrentOkNoGuard,
            AcceptanceKind::CurrentState if !best_tracking => StructuralBucket::CurrentOkNoBestTracking,
            AcceptanceKind::CurrentState if !two_way_moves => StructuralBucket::CurrentOkGuardedButWeakMoves,
            AcceptanceKind::CurrentState => StructuralBucket::CurrentOkStructurallyComplete,
        });
        AuditReport {
            sa_like,
            acceptance,
            guard,
            best_tracking,
            two_way_moves,
            bucket,
            template: self.template_text(&text),
            heuristic: true,
        }
    }
}

/// Text inside the parentheses opened just before `rest`.
fn balanced_argument(rest: &str) -> Option<&str> {
    let mut depth = 1usize;
    for (i, ch) in rest.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&rest[..i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Strip `#` comments and join continuation lines into logical lines.
pub fn logical_text(code: &str) -> String {
    let mut out = String::with_capacity(code.len());
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut chars = code.chars().peekable();
    while let Some(ch) = chars.next() {
        if let Some(q) = quote {
            out.push(ch);
            if ch == '\\' {
                if let Some(next) = chars.next() {
                    out.push(next);
                }
            } else if ch == q || ch == '\n' {
                quote = None;
            }
            continue;
        }
        match ch {
            '#' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                }
            }
            '\'' | '"' => {
                quote = Some(ch);
                out.push(ch);
            }
            '\\' if chars.peek() == Some(&'\n') => {
                chars.next();
                out.push(' ');
            }
            '(' | '[' | '{' => {
                depth += 1;
                out.push(ch);
            }
            ')' | ']' | '}' => {
                depth = (depth - 1).max(0);
                out.push(ch);
            }
            '\r' => {}
            '\n' if depth > 0 => out.push(' '),
            _ => out.push(ch),
        }
    }
    out
}

pub fn is_sa_like(code: &str) -> bool {
    Auditor::builtin().is_sa_like(code)
}

pub fn classify_acceptance(code: &str) -> AcceptanceKind {
    Auditor::builtin().classify_acceptance(code)
}

pub fn structural_taxonomy(code: &str) -> Result<StructuralBucket, NotSaLike> {
    Auditor::builtin().structural_taxonomy(code)
}

pub fn matches_sa_template(code: &str) -> TemplateMatch {
    Auditor::builtin().matches_sa_template(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logical_lines_join_and_strip() {
        let code = "x = 1  # note\nif a or \\\n   b:\n    f(1,\n      2)\ns = '#not'\n";
        assert_eq!(logical_text(code), "x = 1  \nif a or     b:\n    f(1,       2)\ns = '#not'\n");
    }

    #[test]
    fn balanced() {
        assert_eq!(balanced_argument("(a - b) / T) + 1"), Some("(a - b) / T"));
        assert_eq!(balanced_argument("(a"), None);
    }

    #[test]
    fn reference_resolution() {
        let a = Auditor::builtin();
        let code = "T = 100\nT *= 0.9\nd = new - cur\nif random.random() < math.exp(d / T): pass\n";
        assert_eq!(a.classify_acceptance(code), AcceptanceKind::CurrentState);
        let neg = "T = 100\nT *= 0.9\nd = cur - new\nif random.random() < math.exp(-d / T): pass\n";
        assert_eq!(a.classify_acceptance(neg), AcceptanceKind::CurrentState);
        let bug = "T = 100\nT *= 0.9\nif random.random() < math.exp((cand - best_val) / T): pass\n";
        assert_eq!(a.classify_acceptance(bug), AcceptanceKind::GlobalBest);
        assert_eq!(a.classify_acceptance("y = math.exp(2)"), AcceptanceKind::Unresolved);
    }

    #[test]
    fn template_values() {
        let code = "T = 1_000\ncooling_rate = 0.995\nwhile T > 1:\n    if is_feasible(x):\n        if random.random() < math.exp(d / T): pass\n    T *= cooling_rate\n";
        let m = matches_sa_template(code);
        assert_eq!((m.t0, m.alpha, m.dynamic, m.guard, m.metropolis), (Some(1000.0), Some(0.995), true, true, true));
        assert!(m.matched);
    }
}
