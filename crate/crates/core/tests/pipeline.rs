//! End-to-end evaluation, ablation and latency aggregation.

mod common;

use reconad::detector::{Action, DetectionReport};
use reconad::evaluation::{ablate, run_pipeline, write_ablation_csv, AblationAxis, EvaluationReport};
use reconad::metrics::latency_stats;

#[test]
fn report_relations_hold_per_class() {
    let corpus = common::small_corpus(8, 6);
    let (nominal, failures) = common::split(&corpus);
    let r = run_pipeline(&nominal, &failures, &common::quick_config()).unwrap();
    assert_eq!(r.report.classes.len(), 5);
    for c in &r.report.classes {
        assert!(c.f1_global <= c.f1_max, "{}", c.class);
        assert!(c.f1_ours <= c.f1_max, "{}", c.class);
        assert!((0.0..=1.0).contains(&c.auroc));
        assert_eq!(c.runs, 1);
        assert!(c.positive_windows > 0 && c.negative_windows > 0);
    }
    assert_eq!(r.report.threshold_ours, r.profile.aggregate.unwrap());
    let csv = r.report.to_csv_string();
    assert_eq!(csv.lines().next().unwrap(), EvaluationReport::CSV_HEADER);
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn identical_seeds_give_identical_csv() {
    let run = || {
        let corpus = common::small_corpus(9, 4);
        let (nominal, failures) = common::split(&corpus);
        run_pipeline(&nominal, &failures, &common::quick_config())
            .unwrap()
            .report
            .to_csv_string()
    };
    assert_eq!(run(), run());
}

#[test]
fn window_sweep_and_data_fractions_report_auroc() {
    let corpus = common::small_corpus(10, 6);
    let (nominal, failures) = common::split(&corpus);
    let mut base = common::quick_config();
    base.train.epochs = 2;
    base.eval.stride = 10;
    let windows = ablate(&nominal, &failures, &base, AblationAxis::Window, &["50".into(), "100".into()]).unwrap();
    assert_eq!(windows.len(), 2);
    let fractions: Vec<String> = ["0.25", "0.5", "1.0"].iter().map(|s| s.to_string()).collect();
    let rows = ablate(&nominal, &failures, &base, AblationAxis::Fraction, &fractions).unwrap();
    assert!(!rows.is_empty());
    for r in windows.iter().chain(&rows) {
        assert!((0.0..=1.0).contains(&r.auroc));
    }
    assert!(rows.windows(2).all(|w| w[0].train_windows <= w[1].train_windows));
    let mut out = Vec::new();
    write_ablation_csv(&rows, &mut out).unwrap();
    assert!(String::from_utf8(out).unwrap().starts_with("axis,value,auroc,f1_ours,train_windows\n"));
}

fn report(onset: usize, stop: Option<usize>) -> DetectionReport {
    let latency_s = stop.map(|s| (s as f64 - onset as f64) / 500.0);
    DetectionReport {
        sample_rate: 500.0,
        verdicts: Vec::new(),
        stop_index: stop,
        completion_index: None,
        onset: Some(onset),
        latency_s,
        early: stop.is_some_and(|s| s < onset),
        final_action: if stop.is_some() { Action::Stop } else { Action::Continue },
    }
}

#[test]
fn latency_means_match_hand_arithmetic() {
    let reports = vec![
        ("a".to_string(), report(1000, Some(1090))),
        ("a".to_string(), report(1000, Some(1000))),
        ("b".to_string(), report(2000, Some(1990))),
        ("b".to_string(), report(2000, None)),
    ];
    let s = latency_stats(&reports).unwrap();
    // (180 + 0 − 20) / 3 ms
    assert!((s.mean_ms.unwrap() - 160.0 / 3.0).abs() < 1e-9);
    assert_eq!((s.detected, s.undetected, s.early), (3, 1, 1));
    assert_eq!(s.per_class["a"].mean_ms, Some(90.0));
    assert_eq!(s.per_class["b"].mean_ms, Some(-20.0));
    assert!(latency_stats(&[]).is_err());
}
