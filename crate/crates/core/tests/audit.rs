use sds_core::assets::HERO_SA_PY;
use sds_core::audit::{
    classify_acceptance, is_sa_like, matches_sa_template, structural_taxonomy, AcceptanceKind, Auditor, NotSaLike,
    StructuralBucket,
};

const DYNAMIC: &str = include_str!("fixtures/audit/dynamic_add_remove.py");
const BEST_BUG: &str = include_str!("fixtures/audit/best_bug.py");
const CURRENT: &str = include_str!("fixtures/audit/current_guarded.py");
const PASSIVE: &str = include_str!("fixtures/audit/passive_filter.py");
const MIXED: &str = include_str!("fixtures/audit/mixed.py");
const NO_GUARD: &str = include_str!("fixtures/audit/no_guard.py");
const WEAK: &str = include_str!("fixtures/audit/weak_moves.py");
const ALPHA_HALF: &str = include_str!("fixtures/audit/alpha_half.py");
const GREEDY: &str = include_str!("fixtures/audit/greedy.py");
const EXP_ONLY: &str = include_str!("fixtures/audit/exp_only.py");

#[test]
fn sa_likeness() {
    for code in [DYNAMIC, BEST_BUG, CURRENT, PASSIVE, MIXED, NO_GUARD, WEAK, ALPHA_HALF, HERO_SA_PY] {
        assert!(is_sa_like(code));
    }
    assert!(!is_sa_like(GREEDY));
    assert!(!is_sa_like(EXP_ONLY));
    assert!(!is_sa_like(""));
}

#[test]
fn acceptance_kinds() {
    assert_eq!(classify_acceptance(BEST_BUG), AcceptanceKind::GlobalBest);
    assert_eq!(classify_acceptance(CURRENT), AcceptanceKind::CurrentState);
    assert_ne!(classify_acceptance(BEST_BUG), classify_acceptance(CURRENT));
    assert_eq!(classify_acceptance(MIXED), AcceptanceKind::Mixed);
    assert_eq!(classify_acceptance(DYNAMIC), AcceptanceKind::CurrentState);
    assert_eq!(classify_acceptance(PASSIVE), AcceptanceKind::CurrentState);
    assert_eq!(classify_acceptance(HERO_SA_PY), AcceptanceKind::CurrentState);
    assert_eq!(classify_acceptance(GREEDY), AcceptanceKind::Unresolved);
}

#[test]
fn acceptance_survives_rewrites() {
    let negated = "T = 10\nwhile T > 1:\n    if random.random() < math.exp(-(best - cand) / T):\n        x = 1\n    T *= 0.9\n";
    assert_eq!(classify_acceptance(negated), AcceptanceKind::GlobalBest);
    let via_delta = "d = new_score - best_score\nif rng.random() < math.exp(d / T):\n    pass\n";
    assert_eq!(classify_acceptance(via_delta), AcceptanceKind::GlobalBest);
    let np_call = "if np.random.rand() < np.exp((cand_val - cur_val) / temp):\n    pass\n";
    assert_eq!(classify_acceptance(np_call), AcceptanceKind::CurrentState);
    let commented = "# math.exp((x - best) / T)\nif random.random() < math.exp((x - cur) / T):\n    pass\n";
    assert_eq!(classify_acceptance(commented), AcceptanceKind::CurrentState);
}

#[test]
fn taxonomy_buckets() {
    assert_eq!(structural_taxonomy(HERO_SA_PY), Ok(StructuralBucket::CurrentOkStructurallyComplete));
    assert_eq!(structural_taxonomy(CURRENT), Ok(StructuralBucket::CurrentOkStructurallyComplete));
    assert_eq!(structural_taxonomy(BEST_BUG), Ok(StructuralBucket::BestBug));
    assert_eq!(structural_taxonomy(MIXED), Ok(StructuralBucket::AmbiguousAcceptance));
    assert_eq!(structural_taxonomy(NO_GUARD), Ok(StructuralBucket::CurrentOkNoGuard));
    assert_eq!(structural_taxonomy(DYNAMIC), Ok(StructuralBucket::CurrentOkNoBestTracking));
    assert_eq!(structural_taxonomy(WEAK), Ok(StructuralBucket::CurrentOkGuardedButWeakMoves));
    assert_eq!(structural_taxonomy(GREEDY), Err(NotSaLike));
    assert_eq!(structural_taxonomy(EXP_ONLY), Err(NotSaLike));
}

#[test]
fn best_bug_wins_over_every_other_feature() {
    // Same structure as the complete fixture except for the reference.
    let bugged = CURRENT.replace("math.exp(delta/T)", "math.exp((n_score - best_score)/T)");
    assert_eq!(structural_taxonomy(&bugged), Ok(StructuralBucket::BestBug));
}

#[test]
fn template_extraction() {
    let m = matches_sa_template(DYNAMIC);
    assert!(m.matched);
    assert_eq!((m.t0, m.alpha, m.dynamic), (Some(1000.0), Some(0.995), true));

    let m = matches_sa_template(HERO_SA_PY);
    assert!(m.matched);
    assert_eq!((m.t0, m.alpha, m.iterations), (Some(1000.0), Some(0.99), Some(1000)));

    let m = matches_sa_template(ALPHA_HALF);
    assert!(!m.matched);
    assert_eq!(m.alpha, Some(0.5));
    assert!(m.guard && m.metropolis);

    assert!(!matches_sa_template(NO_GUARD).matched);
    assert!(!matches_sa_template(GREEDY).matched);
    let m = matches_sa_template(PASSIVE);
    assert_eq!((m.t0, m.alpha, m.dynamic), (Some(100.0), Some(0.95), true));
}

#[test]
fn report_is_deterministic_and_labeled() {
    let a = Auditor::builtin();
    for code in [DYNAMIC, BEST_BUG, GREEDY] {
        let r = a.audit(code);
        assert!(r.heuristic);
        assert_eq!(r, a.audit(code));
    }
    assert_eq!(a.audit(GREEDY).bucket, None);
}

#[test]
fn retargetable_pattern_file() {
    let text = include_str!("../data/audit_patterns.json");
    let mut v: serde_json::Value = serde_json::from_str(text).unwrap();
    v["best_name"] = serde_json::Value::String("(?i)incumbent".into());
    let custom = Auditor::from_json(&v.to_string()).unwrap();
    let code = CURRENT.replace("math.exp(delta/T)", "math.exp((n_score - incumbent)/T)");
    assert_eq!(custom.classify_acceptance(&code), AcceptanceKind::GlobalBest);
    assert!(Auditor::from_json("{").is_err());
}
