//! Two-stage tournament over a pool of candidate programs.
//!
//! Stage 1 runs every distinct candidate on a small probe set, mostly the
//! instances a reference method handles worst, and drops it at the first
//! probe that is not a valid, in-time answer. Stage 2 runs the best probe
//! performers on the whole test set.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gap, EvalError, GapMode, MeanStd};
use crate::model::Instance;
use crate::pool::parallel_map;
use crate::sandbox::{Candidate, CandidateRun, Harness, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TournamentConfig {
    pub probe_count: usize,
    pub hardest_frac: f64,
    pub survivors: usize,
    pub timeout_sec: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TournamentConfig {
    fn default() -> Self {
        TournamentConfig { probe_count: 30, hardest_frac: 0.6, survivors: 10, timeout_sec: 5.0, seed: 0, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub source_hash: String,
    pub origin: String,
    pub probe_uuid: String,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivorStats {
    pub rank: usize,
    pub source_hash: String,
    pub origin: String,
    pub probe_gap: f64,
    pub mean_gap_unconditional: f64,
    pub mean_gap_conditional: f64,
    pub feasible_rate: f64,
    pub timeout_rate: f64,
    pub mean_elapsed_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentReport {
    pub probe_uuids: Vec<String>,
    /// Candidates dropped as exact duplicates of an earlier pool entry.
    pub duplicates: Vec<String>,
    pub eliminated: Vec<Elimination>,
    /// Stage-1 survivors that did not make the Stage-2 cut, by probe rank.
    pub benched: Vec<String>,
    pub ranking: Vec<SurvivorStats>,
}

/// Probe indices: the `round(probe_count * hardest_frac)` instances with the
/// largest reference gap (ties by index), then uniformly random others.
pub fn select_probes(
    reference_gaps: &[f64],
    probe_count: usize,
    hardest_frac: f64,
    seed: u64,
) -> Result<Vec<usize>, EvalError> {
    let n = reference_gaps.len();
    if probe_count > n {
        return Err(EvalError::TooManyProbes { probes: probe_count, n });
    }
    let hard = ((probe_count as f64 * hardest_frac.clamp(0.0, 1.0)).round() as usize).min(probe_count);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| reference_gaps[b].total_cmp(&reference_gaps[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order[..hard].to_vec();
    let rest: Vec<usize> = order[hard..].to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    chosen.extend(sample(&mut rng, rest.len(), probe_count - hard).into_iter().map(|i| rest[i]));
    Ok(chosen)
}

fn vbs_per_instance(reference: &[f64], runs: &[&Vec<CandidateRun>]) -> Vec<f64> {
    (0..reference.len())
        .map(|i| {
            runs.iter()
                .filter_map(|r| r[i].feasible().then_some(r[i].score).flatten())
                .fold(reference[i], f64::max)
        })
        .collect()
}

fn mean_gap(runs: &[CandidateRun], vbs: &[f64]) -> f64 {
    let gaps: Vec<f64> = runs
        .iter()
        .zip(vbs)
        .map(|(r, &v)| {
            gap(v, r.score.unwrap_or(f64::NEG_INFINITY), r.feasible(), GapMode::UnconditionalInfeasibleIsOne).expect("defined")
        })
        .collect();
    MeanStd::of(&gaps).mean
}

/// Run the tournament. `reference_scores[i]` is the reference method's score
/// on `test_set[i]` (negative infinity when infeasible) and seeds the virtual
/// best; `reference_gaps[i]` orders instances for probe selection.
pub fn tournament(
    pool: &[Candidate],
    test_set: &[Instance],
    reference_scores: &[f64],
    reference_gaps: &[f64],
    cfg: &TournamentConfig,
    harness: &Harness,
) -> Result<TournamentReport, EvalError> {
    if pool.is_empty() {
        return Err(EvalError::EmptyPool);
    }
    assert_eq!(reference_scores.len(), test_set.len(), "one reference score per instance");
    assert_eq!(reference_gaps.len(), test_set.len(), "one reference gap per instance");
    let probe_idx = select_probes(reference_gaps, cfg.probe_count, cfg.hardest_frac, cfg.seed)?;
    let probes: Vec<Instance> = probe_idx.iter().map(|&i| test_set[i].clone()).collect();
    let probe_ref: Vec<f64> = probe_idx.iter().map(|&i| reference_scores[i]).collect();

    let mut seen = HashSet::new();
    let mut duplicates = Vec::new();
    let mut distinct = Vec::new();
    for c in pool {
        if seen.insert(c.source_hash.clone()) {
            distinct.push(c);
        } else {
            duplicates.push(c.origin.clone());
        }
    }

    // Stage 1: each candidate walks the probes in order and stops at the
    // first failure.
    let stage1 = parallel_map(&distinct, cfg.workers, |_, cand| -> Result<Result<Vec<CandidateRun>, Elimination>, EvalError> {
        let mut runs = Vec::with_capacity(probes.len());
        for inst in &probes {
            let run = harness.run(cand, inst, cfg.timeout_sec)?;
            if !run.feasible() {
                return Ok(Err(Elimination {
                    source_hash: cand.source_hash.clone(),
                    origin: cand.origin.clone(),
                    probe_uuid: inst.uuid.clone(),
                    outcome: run.outcome,
                }));
            }
            runs.push(run);
        }
        Ok(Ok(runs))
    });
    let mut eliminated = Vec::new();
    let mut alive: Vec<(usize, Vec<CandidateRun>)> = Vec::new();
    for (i, r) in stage1.into_iter().enumerate() {
        match r? {
            Ok(runs) => alive.push((i, runs)),
            Err(e) => eliminated.push(e),
        }
    }
    let probe_vbs = vbs_per_instance(&probe_ref, &alive.iter().map(|(_, r)| r).collect::<Vec<_>>());
    let mut ranked: Vec<(usize, f64)> = alive.iter().map(|(i, runs)| (*i, mean_gap(runs, &probe_vbs))).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let benched = ranked.iter().skip(cfg.survivors).map(|&(i, _)| distinct[i].origin.clone()).collect();
    ranked.truncate(cfg.survivors);

    // Stage 2: the whole test set, one candidate at a time, instances fanned
    // out over the worker pool.
    let mut full = Vec::with_capacity(ranked.len());
    for &(i, _) in &ranked {
        full.push(harness.run_batch(distinct[i], test_set, cfg.timeout_sec, cfg.workers)?);
    }
    let full_vbs = vbs_per_instance(reference_scores, &full.iter().collect::<Vec<_>>());
    let mut ranking: Vec<SurvivorStats> = ranked
        .iter()
        .zip(&full)
        .map(|(&(i, probe_gap), runs)| {
            let n = runs.len().max(1) as f64;
            let cond: Vec<f64> = runs
                .iter()
                .zip(&full_vbs)
                .filter(|(r, _)| r.feasible())
                .filter_map(|(r, &v)| gap(v, r.score.unwrap_or(f64::NEG_INFINITY), true, GapMode::ConditionalFeasible))
                .collect();
            SurvivorStats {
                rank: 0,
                source_hash: distinct[i].source_hash.clone(),
                origin: distinct[i].origin.clone(),
                probe_gap,
                mean_gap_unconditional: mean_gap(runs, &full_vbs),
                mean_gap_conditional: MeanStd::of(&cond).mean,
                feasible_rate: runs.iter().filter(|r| r.feasible()).count() as f64 / n,
                timeout_rate: runs.iter().filter(|r| r.outcome == Outcome::Timeout).count() as f64 / n,
                mean_elapsed_sec: runs.iter().map(|r| r.elapsed_sec).sum::<f64>() / n,
            }
        })
        .collect();
    // Stable sort keeps probe order among equal full-set gaps.
    ranking.sort_by(|a, b| a.mean_gap_unconditional.total_cmp(&b.mean_gap_unconditional));
    for (k, s) in ranking.iter_mut().enumerate() {
        s.rank = k + 1;
    }
    Ok(TournamentReport {
        probe_uuids: probes.iter().map(|p| p.uuid.clone()).collect(),
        duplicates,
        eliminated,
        benched,
        ranking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probes_take_hardest_then_random() {
        let gaps = [0.0, 0.9, 0.1, 0.5, 0.9, 0.2, 0.0, 0.3, 0.05, 0.4];
        let p = select_probes(&gaps, 5, 0.6, 3).unwrap();
        assert_eq!(&p[..3], &[1, 4, 3]);
        let rest: HashSet<usize> = p[3..].iter().copied().collect();
        assert_eq!(rest.len(), 2);
        assert!(rest.iter().all(|i| ![1, 4, 3].contains(i)));
        assert_eq!(p, select_probes(&gaps, 5, 0.6, 3).unwrap());
        assert!(matches!(select_probes(&gaps, 11, 0.6, 0), Err(EvalError::TooManyProbes { .. })));
    }
}
