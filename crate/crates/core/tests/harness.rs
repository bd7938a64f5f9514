mod common;

use common::*;
use officegate::flows::Phase;
use officegate::harness::*;

fn scenario(trials: Vec<Trial>) -> Scenario {
    Scenario {
        seed: Some(5),
        directory: directory_docs(),
        trials,
        ..Scenario::default()
    }
}

fn guest(target: &str, transcripts: &[&str]) -> Trial {
    Trial::guest(TrialKind::GuestNative, target, transcripts)
}

#[tokio::test]
async fn empty_scenario_gives_empty_report() {
    let r = run_scenario(&Scenario::default(), None).await.unwrap();
    assert!(r.trials.is_empty());
    assert!(r.genuine_scores.is_empty() && r.impostor_scores.is_empty());
    assert!(r.histogram.is_empty());
    assert_eq!((r.far, r.frr), (None, None));
    assert_eq!(r.mismatches, 0);
    assert_eq!(r.timing.sessions, 0);
    assert_eq!(r.guests.native_summary.mean_tries, None);
}

#[tokio::test]
async fn name_needing_two_tries_counts_two() {
    let s = scenario(vec![
        guest("e1", &["anxzzzz", "anna lindberg"]),
        guest("e1", &["ana lindberi"]),
    ]);
    let r = run_scenario(&s, None).await.unwrap();
    assert_eq!(r.mismatches, 0, "{r:?}");
    let tries: Vec<u32> = r.guests.native.iter().map(|n| n.tries).collect();
    assert_eq!(tries, [2, 1]);
    assert_eq!(r.guests.native_summary.tries, 3);
    assert_eq!(r.guests.native_summary.mean_tries.as_deref(), Some("1.50"));
}

#[tokio::test]
async fn confirm_band_answers_by_target() {
    let mut wrong = guest("e2", &["qqqanna lindbexxxxxx", "bo ek"]);
    wrong.expect_tries = Some(2);
    let s = scenario(vec![guest("e1", &["qqqanna lindbexxxxxx"]), wrong]);
    let r = run_scenario(&s, None).await.unwrap();
    assert_eq!(r.mismatches, 0, "{r:?}");
    assert_eq!(r.trials[0].tries, Some(1));
    assert_eq!(r.trials[1].tries, Some(2));
}

#[tokio::test]
async fn exhausted_guest_is_a_mismatch() {
    let s = scenario(vec![guest("e1", &["anxzzzz"])]);
    let r = run_scenario(&s, None).await.unwrap();
    assert_eq!(r.trials[0].outcome, TrialOutcome::Exhausted);
    assert!(r.trace_violations.is_empty(), "{:?}", r.trace_violations);
    assert_eq!(r.mismatches, 1);
    assert!(r.trace_violations.is_empty());
}

fn recount(scores: &[f64], threshold: f64) -> usize {
    let mut n = 0;
    for s in scores {
        if *s > threshold {
            n += 1;
        }
    }
    n
}

#[tokio::test]
async fn far_frr_match_brute_force_recount() {
    let mut s = scenario(vec![]);
    s.generate = vec![
        Generator {
            kind: TrialKind::Genuine,
            count: 30,
            min: 80.0,
            max: 100.0,
            employee_ids: vec![],
            capture_ms: None,
            cloud_auth_ms: None,
            pin_entry_ms: None,
        },
        Generator {
            kind: TrialKind::Impostor,
            count: 30,
            min: 70.0,
            max: 95.0,
            employee_ids: vec!["e2".into()],
            capture_ms: None,
            cloud_auth_ms: None,
            pin_entry_ms: None,
        },
    ];
    // Overlapping ranges: rejected genuines and accepted impostors are expected here.
    for t in &mut s.generate {
        t.count = 30;
    }
    let r = run_scenario(&s, Some(11)).await.unwrap();
    let fr = r.genuine_scores.len() - recount(&r.genuine_scores, 90.0);
    let fa = recount(&r.impostor_scores, 90.0);
    assert!(fr > 0 && fa > 0, "ranges should overlap the threshold");
    assert_eq!(r.false_rejects, fr);
    assert_eq!(r.false_accepts, fa);
    assert_eq!(r.frr, Some(fr as f64 / 30.0));
    assert_eq!(r.far, Some(fa as f64 / 30.0));
    // Default expectations do not hold across the threshold.
    assert_eq!(r.mismatches, fr + fa);
    for (g, b) in [
        (&r.genuine_scores, 80.0..=100.0),
        (&r.impostor_scores, 70.0..=95.0),
    ] {
        assert!(g.iter().all(|x| b.contains(x)));
    }
    let total: usize = r.histogram.iter().map(|b| b.genuine + b.impostor).sum();
    assert_eq!(total, 60);
}

#[tokio::test]
async fn deterministic_per_seed() {
    let mut s = scenario(vec![guest("e1", &["anxzzzz", "anna lindberg"])]);
    s.generate = vec![Generator {
        kind: TrialKind::Genuine,
        count: 10,
        min: 94.25,
        max: 100.0,
        employee_ids: vec![],
        capture_ms: Some(4466),
        cloud_auth_ms: Some(10353),
        pin_entry_ms: Some(5481),
    }];
    let a = report_render(
        &run_scenario(&s, Some(3)).await.unwrap(),
        ReportFormat::Json,
    );
    let b = report_render(
        &run_scenario(&s, Some(3)).await.unwrap(),
        ReportFormat::Json,
    );
    let c = report_render(
        &run_scenario(&s, Some(4)).await.unwrap(),
        ReportFormat::Json,
    );
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[tokio::test]
async fn render_round_trip_and_text() {
    let mut s = scenario(vec![
        Trial::face(TrialKind::Genuine, Some("e1"), 94.25),
        Trial::face(TrialKind::Impostor, Some("e2"), 73.1),
        Trial::face(TrialKind::Impostor, None, 0.0),
    ]);
    s.trials[0].capture_ms = Some(4466);
    s.trials[0].cloud_auth_ms = Some(10353);
    s.trials[0].pin_entry_ms = Some(5481);
    let r = run_scenario(&s, None).await.unwrap();
    assert_eq!(r.mismatches, 0, "{r:?}");
    let json = report_render(&r, ReportFormat::Json);
    let back: Report = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    let text = report_render(&r, ReportFormat::Text);
    assert!(
        text.lines().any(|l| l.starts_with("FAR: 0.0000 (0/2)")),
        "{text}"
    );
    assert!(
        text.lines().any(|l| l.starts_with("FRR: 0.0000 (0/1)")),
        "{text}"
    );
    assert_eq!(r.timing.total_mean_ms, 20300.0);
    assert_eq!(r.timing.phase(Phase::CloudAuth).unwrap().mean_ms, 10353.0);
}

#[tokio::test]
async fn mismatched_expectation_is_counted() {
    let mut t = Trial::face(TrialKind::Genuine, Some("e1"), 97.0);
    t.expect = Some(TrialOutcome::Denied);
    let r = run_scenario(&scenario(vec![t]), None).await.unwrap();
    assert_eq!(r.trials[0].outcome, TrialOutcome::Unlocked);
    assert!(!r.trials[0].ok);
    assert_eq!(r.mismatches, 1);
    assert!(report_render(&r, ReportFormat::Text).contains("mismatch: trial 0"));
}

#[tokio::test]
async fn scenario_errors_name_the_trial() {
    let s = scenario(vec![
        Trial::face(TrialKind::Genuine, Some("e1"), 97.0),
        Trial::face(TrialKind::Genuine, Some("e9"), 97.0),
    ]);
    match run_scenario(&s, None).await {
        Err(ScenarioError::Trial { index: 1, reason }) => assert!(reason.contains("e9")),
        other => panic!("{other:?}"),
    }
    let s = scenario(vec![Trial::face(TrialKind::Impostor, None, 101.0)]);
    assert!(matches!(
        run_scenario(&s, None).await,
        Err(ScenarioError::Trial { index: 0, .. })
    ));
    let s = scenario(vec![guest("e1", &[])]);
    assert!(matches!(
        run_scenario(&s, None).await,
        Err(ScenarioError::Trial { index: 0, .. })
    ));
    let bad = Scenario::from_json(r#"{"trials": [{"kind": "ghost"}]}"#);
    assert!(matches!(bad, Err(ScenarioError::Json(_))));
}

#[tokio::test]
async fn impostor_with_accepted_face_is_locked_out() {
    let mut t = Trial::face(TrialKind::Impostor, Some("e2"), 95.0);
    t.expect = Some(TrialOutcome::LockedOut);
    let r = run_scenario(&scenario(vec![t]), None).await.unwrap();
    assert_eq!(r.trials[0].outcome, TrialOutcome::LockedOut);
    assert_eq!(r.false_accepts, 1);
    assert_eq!(r.far, Some(1.0));
    assert!(r.trace_violations.is_empty());
}
