mod common;

use common::arb_instance;
use proptest::prelude::*;
use sds_core::model::{Instance, Selection};
use sds_core::reward::{
    compute_reward, degenerate_normalize, diversity_penalty, exec_reward, gated_nominal, intermediate_score,
    normalize_score, normalize_score_with, CompositeWeights, Gate, Normalization, RewardConfig, Sample,
    TrainingProgress,
};
use sds_core::sandbox::{CandidateRun, Outcome};

fn run(outcome: Outcome, score: Option<f64>, n_vio: usize) -> CandidateRun {
    CandidateRun {
        instance_uuid: "u".into(),
        outcome,
        selection: score.map(|_| Selection::empty()),
        score,
        n_vio,
        elapsed_sec: 0.1,
        stderr_excerpt: String::new(),
    }
}

/// Baseline recomputed from the JSON document: top-U positive weights plus
/// mean positive interaction times min(#positive, U(U-1)/2).
fn oracle_baseline(inst: &Instance) -> f64 {
    let doc = common::raw(inst);
    let hi = doc["requirements"]["cardinality_bounds"][1].as_u64().unwrap() as usize;
    let mut w: Vec<f64> = doc["catalog"]["variables"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["weight"].as_f64().unwrap())
        .filter(|&x| x > 0.0)
        .collect();
    w.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let wmax: f64 = w.iter().take(hi).sum();
    let pos: Vec<f64> =
        doc["catalog"]["interactions"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).filter(|&x| x > 0.0).collect();
    let imax = if pos.is_empty() {
        0.0
    } else {
        pos.iter().sum::<f64>() / pos.len() as f64 * pos.len().min(hi * hi.saturating_sub(1) / 2) as f64
    };
    wmax + imax
}

#[test]
fn hand_example_for_the_weighted_case() {
    let inst = Instance::from_json(
        r#"{"uuid":"h","problem_type":"t","requirements":{"n_variables":3,"cardinality_bounds":[0,2]},
            "catalog":{"variables":[{"weight":5},{"weight":3},{"weight":-1}],"interactions":{"0,1":4,"1,2":-2}}}"#,
    )
    .unwrap();
    assert_eq!(oracle_baseline(&inst), 12.0);
    assert_eq!(normalize_score(&inst, 6.0), 0.5);
    assert_eq!(normalize_score_with(&inst, 6.0, Normalization::TopPositive), 0.5);
}

#[test]
fn degenerate_objective_uses_the_squash() {
    let inst = Instance::from_json(
        r#"{"uuid":"z","problem_type":"t","requirements":{"n_variables":2,"cardinality_bounds":[0,2]},
            "catalog":{"variables":[{"weight":0},{"weight":0}],"interactions":{}}}"#,
    )
    .unwrap();
    assert_eq!(normalize_score(&inst, 0.0), 0.5);
    assert_eq!(normalize_score(&inst, 3.0), degenerate_normalize(3.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn squash_is_bounded_centered_and_increasing(s in -1e6f64..1e6, d in 1e-3f64..1e3) {
        let a = degenerate_normalize(s);
        let b = degenerate_normalize(s + d);
        prop_assert!(a > 0.0 && a < 1.0);
        prop_assert!(b > a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn weighted_normalization_matches_oracle(inst in arb_instance(10), s in -50.0f64..50.0) {
        let b = oracle_baseline(&inst);
        let got = normalize_score(&inst, s);
        if b > 1e-9 {
            prop_assert!((got - s / b).abs() < 1e-12);
        }
    }

    #[test]
    fn gates(x in -2.0f64..2.0, n in 0usize..12) {
        let hard = gated_nominal(x, n, Gate::Hard);
        let soft = gated_nominal(x, n, Gate::Soft);
        if n > 0 {
            prop_assert_eq!(hard, 0.0);
        } else {
            prop_assert_eq!(hard, x.clamp(0.0, 1.0));
        }
        prop_assert_eq!(soft, (x - 0.15 * n as f64).clamp(0.0, 1.0));
        prop_assert!(soft >= hard || n == 0);
        let i = intermediate_score(x, n);
        prop_assert!((0.0..=1.0).contains(&i));
    }

    #[test]
    fn exec_reward_is_the_sum_of_its_parts(n in 0usize..15, t in 0.0f64..1.0, code in "[a-z_ ]{0,40}") {
        for outcome in Outcome::ALL {
            let score = matches!(outcome, Outcome::Valid | Outcome::ConstraintViolation).then_some(1.0);
            let e = exec_reward(&run(outcome, score, n), &code, TrainingProgress::new(t));
            let sum = e.r_syntax + e.r_schema + e.r_structure + e.r_feasibility + e.lazy_penalty;
            prop_assert!((e.r_exec - sum).abs() < 1e-15);
            prop_assert!(e.r_exec >= -0.4 - 1e-12 && e.r_exec <= 0.7 + 1e-12);
            if !outcome.executed() {
                prop_assert_eq!(e.r_exec, 0.0);
            }
        }
    }

    #[test]
    fn diversity_penalty_is_bounded(a in "[a-c ]{0,30}", b in "[a-c ]{0,30}", c in "[a-c ]{0,30}") {
        let p = diversity_penalty(&[&a, &b, &c]);
        prop_assert_eq!(p.len(), 3);
        prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
        let same = diversity_penalty(&[&a, &a]);
        prop_assert_eq!(same, vec![1.0, 1.0]);
    }

    #[test]
    fn composite_is_linear(f in 0.0f64..1.0, e in -0.4f64..0.7, n in 0.0f64..1.0, d in 0.0f64..1.0) {
        let w = CompositeWeights::default();
        prop_assert!((w.combine(f, e, n, d) - (0.1 * f + 0.2 * e + 0.7 * n)).abs() < 1e-12);
        let wd = CompositeWeights::with_diversity();
        prop_assert!((wd.combine(f, e, n, d) - (0.1 * f + 0.2 * e + 0.6 * n - 0.1 * d)).abs() < 1e-12);
    }
}

#[test]
fn breakdown_of_a_missing_program() {
    let inst = Instance::from_json(
        r#"{"uuid":"m","problem_type":"t","requirements":{"n_variables":1,"cardinality_bounds":[0,1]},
            "catalog":{"variables":[{"weight":1}],"interactions":{}}}"#,
    )
    .unwrap();
    let sample = Sample {
        text: "<think>x</think>",
        code: None,
        run: None,
        instance: &inst,
        progress: TrainingProgress::new(0.1),
        greedy_score: None,
        diversity: None,
    };
    let b = compute_reward(&sample, &RewardConfig::default());
    assert_eq!((b.r_format, b.r_exec, b.r_nominal, b.composite), (0.0, 0.0, 0.0, 0.0));
    assert_eq!(b.outcome, None);
}
