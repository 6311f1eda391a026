//! Virtual-best comparisons, difficulty strata, pass@k bootstrap and the
//! record/metrics file formats.
//!
//! Scores of infeasible rows are negative infinity everywhere. In CSV files
//! floats use Rust's shortest round-trip formatting (`-inf` included), so a
//! file read back reproduces every aggregate exactly. JSON summaries carry
//! six significant digits.

mod tournament;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tournament::{select_probes, tournament, Elimination, SurvivorStats, TournamentConfig, TournamentReport};

use crate::sandbox::{CandidateRun, Outcome, SandboxError};
use crate::solvers::SolveResult;

pub const HARDNESS_EPS: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown instance {0:?}")]
    UnknownUuid(String),
    #[error("k = {k} exceeds the pool size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("k and the bootstrap count must be at least 1")]
    ZeroK,
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("probe count {probes} exceeds test set size {n}")]
    TooManyProbes { probes: usize, n: usize },
    #[error("method {method:?} has {count} rows for instance {uuid:?}")]
    DuplicateRow { method: String, uuid: String, count: usize },
    #[error("malformed record file: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub uuid: String,
    pub feasible: bool,
    pub error_type: String,
    pub score: f64,
    pub elapsed_sec: f64,
    pub code_hash: Option<String>,
}

impl RecordRow {
    pub fn from_solve(uuid: &str, r: &SolveResult) -> RecordRow {
        RecordRow {
            uuid: uuid.to_string(),
            feasible: r.feasible,
            error_type: if r.feasible { "none" } else { "constraint" }.into(),
            score: r.score,
            elapsed_sec: r.elapsed_sec,
            code_hash: None,
        }
    }

    pub fn from_run(run: &CandidateRun, code_hash: Option<&str>) -> RecordRow {
        RecordRow {
            uuid: run.instance_uuid.clone(),
            feasible: run.feasible(),
            error_type: run.outcome.error_type().into(),
            score: if run.feasible() { run.score.unwrap_or(f64::NEG_INFINITY) } else { f64::NEG_INFINITY },
            elapsed_sec: run.elapsed_sec,
            code_hash: code_hash.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: String,
    pub rows: Vec<RecordRow>,
}

impl MethodRecord {
    pub fn row(&self, uuid: &str) -> Option<&RecordRow> {
        self.rows.iter().find(|r| r.uuid == uuid)
    }

    pub fn check_unique(&self) -> Result<(), EvalError> {
        let mut seen = BTreeMap::new();
        for r in &self.rows {
            *seen.entry(&r.uuid).or_insert(0usize) += 1;
        }
        match seen.into_iter().find(|&(_, c)| c > 1) {
            Some((uuid, count)) => Err(EvalError::DuplicateRow { method: self.method.clone(), uuid: uuid.clone(), count }),
            None => Ok(()),
        }
    }
}

/// Best feasible score on `uuid` over every method, or negative infinity.
pub fn compute_vbs(records: &[MethodRecord], uuid: &str) -> Result<f64, EvalError> {
    let mut known = false;
    let mut best = f64::NEG_INFINITY;
    for rec in records {
        for r in rec.rows.iter().filter(|r| r.uuid == uuid) {
            known = true;
            if r.feasible && r.score > best {
                best = r.score;
            }
        }
    }
    if known {
        Ok(best)
    } else {
        Err(EvalError::UnknownUuid(uuid.to_string()))
    }
}

/// VBS for every uuid seen in any record.
pub fn vbs_table(records: &[MethodRecord]) -> BTreeMap<String, f64> {
    let mut table = BTreeMap::new();
    for rec in records {
        for r in &rec.rows {
            let slot = table.entry(r.uuid.clone()).or_insert(f64::NEG_INFINITY);
            if r.feasible && r.score > *slot {
                *slot = r.score;
            }
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMode {
    ConditionalFeasible,
    UnconditionalInfeasibleIsOne,
}

/// Relative shortfall against the virtual best, in `[0, 1]`.
///
/// Negative scores count as zero. When the virtual best is not positive the
/// ratio is meaningless, so a feasible row gets 0 if it reaches the virtual
/// best and 1 otherwise.
pub fn gap(vbs: f64, score: f64, feasible: bool, mode: GapMode) -> Option<f64> {
    if !feasible {
        return match mode {
            GapMode::ConditionalFeasible => None,
            GapMode::UnconditionalInfeasibleIsOne => Some(1.0),
        };
    }
    if vbs > 0.0 {
        Some(((vbs - score.max(0.0)) / vbs).clamp(0.0, 1.0))
    } else if score >= vbs {
        Some(0.0)
    } else {
        Some(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Trivial,
    Moderate,
    Hard,
}

impl Difficulty {
    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Trivial => "trivial",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
        }
    }

    pub fn from_name(s: &str) -> Option<Difficulty> {
        [Difficulty::Trivial, Difficulty::Moderate, Difficulty::Hard].into_iter().find(|d| d.name() == s)
    }

    pub fn from_hardness(h: f64) -> Difficulty {
        if h < 0.01 {
            Difficulty::Trivial
        } else if h < 0.10 {
            Difficulty::Moderate
        } else {
            Difficulty::Hard
        }
    }
}

/// Greedy's relative shortfall against the virtual best, clamped to `[0, 1]`.
pub fn classify_difficulty(vbs: f64, greedy_score: f64, greedy_feasible: bool) -> (f64, Difficulty) {
    let hardness = if vbs == f64::NEG_INFINITY || !greedy_feasible {
        1.0
    } else {
        ((vbs - greedy_score) / vbs.abs().max(HARDNESS_EPS)).clamp(0.0, 1.0)
    };
    (hardness, Difficulty::from_hardness(hardness))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceVerdict {
    pub uuid: String,
    pub vbs: f64,
    /// Present when a reference (greedy) record covers the instance.
    pub hardness: Option<f64>,
    pub difficulty: Option<Difficulty>,
    /// Conditional gap per method; absent for infeasible rows.
    pub gaps: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub uuid: String,
    pub method: String,
    pub feasible: bool,
    pub error_type: String,
    pub score: f64,
    pub gap_conditional: Option<f64>,
    pub gap_unconditional: f64,
    pub hardness: Option<f64>,
    pub difficulty: Option<Difficulty>,
    pub elapsed_sec: f64,
    pub code_hash: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics; NaN for an empty slice.
    pub fn of(xs: &[f64]) -> MeanStd {
        if xs.is_empty() {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        if xs.iter().all(|&x| x == xs[0]) {
            return MeanStd { mean: xs[0], std: 0.0 };
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        MeanStd { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub instances: usize,
    pub pass_rate: MeanStd,
    pub gap_conditional: MeanStd,
    pub gap_unconditional: MeanStd,
    pub time_sec: MeanStd,
    pub total_time_sec: f64,
    /// Mean unconditional gap per difficulty stratum.
    pub gap_by_difficulty: BTreeMap<String, f64>,
    pub error_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub verdicts: Vec<InstanceVerdict>,
    pub rows: Vec<MetricsRow>,
    pub summary: Vec<MethodSummary>,
}

/// Score every record against the shared virtual best. `reference` names the
/// method whose shortfall defines hardness.
pub fn evaluate(records: &[MethodRecord], reference: Option<&str>) -> Result<Evaluation, EvalError> {
    for rec in records {
        rec.check_unique()?;
    }
    let vbs = vbs_table(records);
    let reference = reference.and_then(|name| records.iter().find(|r| r.method == name));
    let mut verdicts = Vec::with_capacity(vbs.len());
    let mut strata = BTreeMap::new();
    for (uuid, &v) in &vbs {
        let (hardness, difficulty) = match reference.and_then(|r| r.row(uuid)) {
            Some(g) => {
                let (h, d) = classify_difficulty(v, g.score, g.feasible);
                (Some(h), Some(d))
            }
            None => (None, None),
        };
        strata.insert(uuid.clone(), (hardness, difficulty));
        let gaps = records
            .iter()
            .filter_map(|rec| rec.row(uuid).map(|r| (rec.method.clone(), gap(v, r.score, r.feasible, GapMode::ConditionalFeasible))))
            .collect();
        verdicts.push(InstanceVerdict { uuid: uuid.clone(), vbs: v, hardness, difficulty, gaps });
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for rec in records {
        let mut feas = Vec::new();
        let mut cond = Vec::new();
        let mut uncond = Vec::new();
        let mut times = Vec::new();
        let mut by_diff: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut errors = BTreeMap::new();
        for r in &rec.rows {
            let v = vbs[&r.uuid];
            let (hardness, difficulty) = strata[&r.uuid];
            let gc = gap(v, r.score, r.feasible, GapMode::ConditionalFeasible);
            let gu = gap(v, r.score, r.feasible, GapMode::UnconditionalInfeasibleIsOne).expect("always defined");
            feas.push(if r.feasible { 1.0 } else { 0.0 });
            cond.extend(gc);
            uncond.push(gu);
            times.push(r.elapsed_sec);
            if let Some(d) = difficulty {
                by_diff.entry(d.name().to_string()).or_default().push(gu);
            }
            *errors.entry(r.error_type.clone()).or_insert(0) += 1;
            rows.push(MetricsRow {
                uuid: r.uuid.clone(),
                method: rec.method.clone(),
                feasible: r.feasible,
                error_type: r.error_type.clone(),
                score: r.score,
                gap_conditional: gc,
                gap_unconditional: gu,
                hardness,
                difficulty,
                elapsed_sec: r.elapsed_sec,
                code_hash: r.code_hash.clone(),
            });
        }
        summary.push(MethodSummary {
            method: rec.method.clone(),
            instances: rec.rows.len(),
            pass_rate: MeanStd::of(&feas),
            gap_conditional: MeanStd::of(&cond),
            gap_unconditional: MeanStd::of(&uncond),
            time_sec: MeanStd::of(&times),
            total_time_sec: times.iter().sum(),
            gap_by_difficulty: by_diff.into_iter().map(|(k, v)| (k, MeanStd::of(&v).mean)).collect(),
            error_counts: errors,
        });
    }
    Ok(Evaluation { verdicts, rows, summary })
}

/// One sample of a best-of-N pool on one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolSample {
    pub feasible: bool,
    /// Unconditional gap (1.0 when infeasible).
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassAtK {
    pub k: usize,
    pub pass: MeanStd,
    pub gap: MeanStd,
}

/// Bootstrap pass@k: every iteration draws `k` of the `N` samples of each
/// instance without replacement, records whether any is feasible and the
/// smallest gap, and averages over instances. Mean and population standard
/// deviation are taken over the `b` iterations.
pub fn pass_at_k(pools: &[Vec<PoolSample>], k: usize, b: usize, seed: u64) -> Result<PassAtK, EvalError> {
    if k == 0 || b == 0 {
        return Err(EvalError::ZeroK);
    }
    if let Some(p) = pools.iter().find(|p| p.len() < k) {
        return Err(EvalError::KTooLarge { k, n: p.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passes = Vec::with_capacity(b);
    let mut gaps = Vec::with_capacity(b);
    for _ in 0..b {
        let mut pass_sum = 0.0;
        let mut gap_sum = 0.0;
        for pool in pools {
            let mut any = false;
            let mut best = 1.0f64;
            for i in sample(&mut rng, pool.len(), k) {
                let s = pool[i];
                if s.feasible {
                    any = true;
                    best = best.min(s.gap);
                }
            }
            pass_sum += if any { 1.0 } else { 0.0 };
            gap_sum += best;
        }
        let m = pools.len().max(1) as f64;
        passes.push(pass_sum / m);
        gaps.push(gap_sum / m);
    }
    Ok(PassAtK { k, pass: MeanStd::of(&passes), gap: MeanStd::of(&gaps) })
}

/// Keep, per instance, the feasible sample with the smallest gap (earliest on
/// ties). Elapsed time is the sum over all samples of that instance.
pub fn best_of_n_collapse(method: &str, samples: &BTreeMap<String, Vec<RecordRow>>, vbs: &BTreeMap<String, f64>) -> MethodRecord {
    let mut rows = Vec::with_capacity(samples.len());
    for (uuid, runs) in samples {
        let total: f64 = runs.iter().map(|r| r.elapsed_sec).sum();
        let v = vbs.get(uuid).copied().unwrap_or(f64::NEG_INFINITY);
        let mut best: Option<(f64, &RecordRow)> = None;
        for r in runs.iter().filter(|r| r.feasible) {
            let g = gap(v, r.score, true, GapMode::ConditionalFeasible).expect("feasible");
            if best.is_none_or(|(bg, _)| g < bg) {
                best = Some((g, r));
            }
        }
        let row = match best {
            Some((_, r)) => RecordRow { uuid: uuid.clone(), elapsed_sec: total, ..r.clone() },
            None => RecordRow {
                uuid: uuid.clone(),
                feasible: false,
                error_type: runs.first().map_or_else(|| "runtime".to_string(), |r| r.error_type.clone()),
                score: f64::NEG_INFINITY,
                elapsed_sec: total,
                code_hash: None,
            },
        };
        rows.push(row);
    }
    MethodRecord { method: method.to_string(), rows }
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(s: &str) -> Result<f64, EvalError> {
    s.trim().parse().map_err(|_| EvalError::Format(format!("bad number {s:?}")))
}

fn parse_opt(s: &str) -> Result<Option<f64>, EvalError> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

fn parse_bool(s: &str) -> Result<bool, EvalError> {
    match s.trim() {
        "true" | "True" | "1" => Ok(true),
        "false" | "False" | "0" => Ok(false),
        other => Err(EvalError::Format(format!("bad boolean {other:?}"))),
    }
}

fn check_error_type(s: &str) -> Result<String, EvalError> {
    Outcome::from_error_type(s)
        .map(|o| o.error_type().to_string())
        .ok_or_else(|| EvalError::Format(format!("unknown error_type {s:?}")))
}

pub const RECORD_HEADER: [&str; 7] = ["uuid", "method", "feasible", "error_type", "score", "elapsed_sec", "code_hash"];

pub const METRICS_HEADER: [&str; 11] = [
    "uuid",
    "method",
    "feasible",
    "error_type",
    "score",
    "gap_conditional",
    "gap_unconditional",
    "hardness",
    "difficulty",
    "elapsed_sec",
    "code_hash",
];

pub fn write_records_csv<W: Write>(writer: W, records: &[MethodRecord]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORD_HEADER)?;
    for rec in records {
        for r in &rec.rows {
            w.write_record([
                r.uuid.as_str(),
                rec.method.as_str(),
                if r.feasible { "true" } else { "false" },
                r.error_type.as_str(),
                &fmt_f64(r.score),
                &fmt_f64(r.elapsed_sec),
                r.code_hash.as_deref().unwrap_or(""),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Read record rows, grouping them by method in order of first appearance.
pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<MethodRecord>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RECORD_HEADER {
        return Err(EvalError::Format(format!("unexpected header {header:?}")));
    }
    let mut out: Vec<MethodRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let method = &rec[1];
        let row = RecordRow {
            uuid: rec[0].to_string(),
            feasible: parse_bool(&rec[2])?,
            error_type: check_error_type(&rec[3])?,
            score: parse_f64(&rec[4])?,
            elapsed_sec: parse_f64(&rec[5])?,
            code_hash: Some(rec[6].to_string()).filter(|s| !s.is_empty()),
        };
        match out.iter_mut().find(|m| m.method == method) {
            Some(m) => m.rows.push(row),
            None => out.push(MethodRecord { method: method.to_string(), rows: vec![row] }),
        }
    }
    Ok(out)
}

pub fn write_metrics_csv<W: Write>(writer: W, rows: &[MetricsRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.uuid.as_str(),
            r.method.as_str(),
            if r.feasible { "true" } else { "false" },
            r.error_type.as_str(),
            &fmt_f64(r.score),
            &fmt_opt(r.gap_conditional),
            &fmt_f64(r.gap_unconditional),
            &fmt_opt(r.hardness),
            r.difficulty.map(Difficulty::name).unwrap_or(""),
            &fmt_f64(r.elapsed_sec),
            r.code_hash.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(reader: R) -> Result<Vec<MetricsRow>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(EvalError::Format(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let difficulty = match rec[8].trim() {
            "" => None,
            s => Some(Difficulty::from_name(s).ok_or_else(|| EvalError::Format(format!("bad difficulty {s:?}")))?),
        };
        rows.push(MetricsRow {
            uuid: rec[0].to_string(),
            method: rec[1].to_string(),
            feasible: parse_bool(&rec[2])?,
            error_type: check_error_type(&rec[3])?,
            score: parse_f64(&rec[4])?,
            gap_conditional: parse_opt(&rec[5])?,
            gap_unconditional: parse_f64(&rec[6])?,
            hardness: parse_opt(&rec[7])?,
            difficulty,
            elapsed_sec: parse_f64(&rec[9])?,
            code_hash: Some(rec[10].to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(rows)
}

/// Round to `digits` significant digits. Non-finite values pass through.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Serialize to JSON with every float rounded to six significant digits and
/// non-finite floats written as `null`.
pub fn to_rounded_json<T: Serialize>(value: &T) -> serde_json::Value {
    fn walk(v: serde_json::Value) -> serde_json::Value {
        use serde_json::Value;
        match v {
            Value::Number(n) if n.is_f64() => {
                let x = round_sig(n.as_f64().expect("f64 number"), 6);
                serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
            }
            Value::Array(a) => Value::Array(a.into_iter().map(walk).collect()),
            Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, walk(v))).collect()),
            other => other,
        }
    }
    walk(serde_json::to_value(value).expect("serializable report"))
}

/// All uuids covered by any record, sorted.
pub fn covered_uuids(records: &[MethodRecord]) -> BTreeSet<String> {
    records.iter().flat_map(|r| r.rows.iter().map(|row| row.uuid.clone())).collect()
}
