use std::time::Instant;

use sds_core::assets::HERO_SA_PY;
use sds_core::gen::{generate, Family, GenSpec};
use sds_core::model::{check_feasibility, score, Instance};
use sds_core::sandbox::{source_hash, Candidate, Harness, Outcome, RunnerConfig, SandboxError};

fn fixture(name: &str) -> Candidate {
    let path = format!("{}/tests/fixtures/sandbox/{name}", env!("CARGO_MANIFEST_DIR"));
    Candidate::from_file(path.as_ref()).unwrap()
}

fn small() -> Instance {
    Instance::from_json(
        r#"{"uuid":"s1","problem_type":"test",
            "requirements":{"n_variables":4,"cardinality_bounds":[1,2],"precedence":[[0,2]],"mutex":[[0,1]],"groups":{"g":[2,3]}},
            "catalog":{"variables":[{"weight":3},{"weight":2},{"weight":1},{"weight":-1}],"interactions":{"0,2":2.5,"1,3":-1}}}"#,
    )
    .unwrap()
}

fn harness() -> Harness {
    Harness::new(RunnerConfig::default())
}

#[test]
fn outcome_per_fixture() {
    let h = harness();
    let inst = small();
    let cases = [
        (Candidate::new(HERO_SA_PY, "hero"), Outcome::Valid),
        (fixture("crash.py"), Outcome::RuntimeError),
        (fixture("syntax_error.py"), Outcome::SyntaxError),
        (fixture("garbage.py"), Outcome::JsonParseError),
        (fixture("out_of_range.py"), Outcome::JsonParseError),
        (fixture("select_all.py"), Outcome::ConstraintViolation),
        (fixture("exit_after_print.py"), Outcome::RuntimeError),
    ];
    for (cand, want) in cases {
        let run = h.run(&cand, &inst, 10.0).unwrap();
        assert_eq!(run.outcome, want, "{}: {}", cand.origin, run.stderr_excerpt);
        assert_eq!(run.instance_uuid, "s1");
    }
}

#[test]
fn valid_run_is_rescored_by_the_model() {
    let inst = small();
    let run = harness().run(&Candidate::new(HERO_SA_PY, "hero"), &inst, 10.0).unwrap();
    let sel = run.selection.clone().unwrap();
    assert!(check_feasibility(&inst, &sel).unwrap().feasible);
    assert_eq!(run.score, Some(score(&inst, &sel).unwrap()));
    // {0, 2} is the unique optimum: 3 + 1 + 2.5.
    assert_eq!(sel.indices(), &[0, 2]);
    assert_eq!(run.n_vio, 0);
}

#[test]
fn violation_count_is_reported() {
    let inst = small();
    let run = harness().run(&fixture("select_all.py"), &inst, 10.0).unwrap();
    // cardinality, mutex (0,1), group g
    assert_eq!(run.n_vio, 3);
    assert!(run.score.is_some());
    assert!(!run.feasible());
}

#[test]
fn timeout_kills_the_whole_process_group() {
    let inst = small();
    let start = Instant::now();
    let run = harness().run(&fixture("fork_sleep.py"), &inst, 1.0).unwrap();
    assert_eq!(run.outcome, Outcome::Timeout);
    assert!(start.elapsed().as_secs_f64() < 1.5, "{:?}", start.elapsed());

    let start = Instant::now();
    let run = harness().run(&fixture("infinite_loop.py"), &inst, 1.0).unwrap();
    assert_eq!(run.outcome, Outcome::Timeout);
    assert!(start.elapsed().as_secs_f64() < 1.5);
}

#[test]
fn batch_preserves_order_and_matches_single_runs() {
    let inst = generate(&GenSpec::new(Family::DenseDeceptive).with_n_range(10, 12), 6, 4).unwrap();
    let h = harness();
    let cand = Candidate::new(HERO_SA_PY, "hero");
    let batch = h.run_batch(&cand, &inst, 10.0, 3).unwrap();
    assert_eq!(batch.len(), inst.len());
    for (run, i) in batch.iter().zip(&inst) {
        assert_eq!(run.instance_uuid, i.uuid);
        let single = h.run(&cand, i, 10.0).unwrap();
        assert_eq!(single.selection, run.selection);
    }
    assert!(h.run_batch(&cand, &[], 1.0, 2).unwrap().is_empty());
}

#[test]
fn runner_configuration_errors() {
    let inst = small();
    let cand = fixture("garbage.py");
    assert!(matches!(harness().run(&cand, &inst, 0.0), Err(SandboxError::BadTimeout(_))));
    let empty = Harness::new(RunnerConfig { command: vec![], ..RunnerConfig::default() });
    assert!(empty.check_runner().is_err());
    let missing = Harness::new(RunnerConfig { command: vec!["/nonexistent/interp".into()], ..RunnerConfig::default() });
    assert!(missing.check_runner().is_err());
}

#[test]
fn hash_is_stable_across_line_endings() {
    let a = Candidate::new(HERO_SA_PY, "a");
    let b = Candidate::new(HERO_SA_PY.replace('\n', "\r\n"), "b");
    assert_eq!(a.source_hash, b.source_hash);
    assert_eq!(a.source_hash, source_hash(HERO_SA_PY));
}
