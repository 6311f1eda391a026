use sds_core::assets::HERO_SA_PY;
use sds_core::eval::{tournament, EvalError, TournamentConfig};
use sds_core::gen::{generate, Family, GenSpec};
use sds_core::sandbox::{Candidate, Harness, RunnerConfig};
use sds_core::solvers::{Greedy, Solver};

fn fixture(name: &str) -> Candidate {
    let path = format!("{}/tests/fixtures/sandbox/{name}", env!("CARGO_MANIFEST_DIR"));
    Candidate::from_file(path.as_ref()).unwrap()
}

#[test]
fn broken_candidates_are_eliminated_and_duplicates_dropped() {
    let insts = generate(&GenSpec::new(Family::DenseDeceptive).with_n_range(10, 12), 6, 11).unwrap();
    let scores: Vec<f64> = insts.iter().map(|i| Greedy.solve(i, 1.0, 0).unwrap().score).collect();
    let gaps: Vec<f64> = (0..insts.len()).map(|i| i as f64 / 10.0).collect();
    let hero = Candidate::new(HERO_SA_PY, "hero");
    let hero_crlf = Candidate::new(HERO_SA_PY.replace('\n', "\r\n"), "hero-crlf");
    let pool = vec![
        hero,
        fixture("crash.py"),
        fixture("garbage.py"),
        hero_crlf,
        fixture("syntax_error.py"),
        fixture("infinite_loop.py"),
    ];
    let cfg = TournamentConfig { probe_count: 3, survivors: 2, timeout_sec: 1.0, workers: 2, ..Default::default() };
    let harness = Harness::new(RunnerConfig::default());
    let report = tournament(&pool, &insts, &scores, &gaps, &cfg, &harness).unwrap();
    assert_eq!(report.duplicates, vec!["hero-crlf".to_string()]);
    assert_eq!(report.eliminated.len(), 4);
    assert_eq!(report.ranking.len(), 1);
    assert_eq!(report.ranking[0].origin, "hero");
    assert_eq!(report.ranking[0].rank, 1);
    assert_eq!(report.ranking[0].feasible_rate, 1.0);
    // round(3 * 0.6) = 2 hardest by reference gap, then one random pick.
    let want: Vec<String> = [5, 4].iter().map(|&i| insts[i].uuid.clone()).collect();
    assert_eq!(report.probe_uuids[..2], want[..]);
    assert_eq!(report.probe_uuids.len(), 3);
    assert!(!want.contains(&report.probe_uuids[2]));
    // Every elimination happened on the first probe for these candidates.
    assert!(report.eliminated.iter().all(|e| e.probe_uuid == want[0]));

    assert!(matches!(tournament(&[], &insts, &scores, &gaps, &cfg, &harness), Err(EvalError::EmptyPool)));
}
