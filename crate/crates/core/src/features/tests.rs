use super::*;
use crate::ingest::{
    CohortTable, GradeItem, GradeRecord, LearnerUsageRecord, Provenance, Role, Term,
};
use crate::FEATURE_NAMES;
use proptest::prelude::*;

fn usage(student: &str, section: &str, values: [Option<f64>; 4]) -> LearnerUsageRecord {
    LearnerUsageRecord {
        student_id: student.into(),
        section_id: section.into(),
        term: Term::Fall2019,
        school: "School of Business".into(),
        role: Role::Student,
        content_completed: values[0].map(|v| v as u32),
        content_required: None,
        checklist_completed: None,
        quiz_completed: None,
        total_quiz_attempts: None,
        discussion_post_created: None,
        discussion_post_replies: None,
        discussion_post_read: None,
        last_discussion_post_date: None,
        number_of_assignment_submissions: values[1].map(|v| v as u32),
        last_assignment_submission_date: None,
        total_time_spent_in_content: values[2],
        last_visited_date: None,
        last_system_login: None,
        number_of_logins_to_the_system: values[3].map(|v| v as u32),
    }
}

fn cohort(usage_rows: Vec<LearnerUsageRecord>, grades: Vec<GradeRecord>) -> CohortTable {
    CohortTable {
        usage: usage_rows,
        grades,
        provenance: Provenance::RealExport,
    }
}

fn grade(student: &str, section: &str, item: GradeItem, value: f64) -> GradeRecord {
    GradeRecord {
        student_id: student.into(),
        section_id: section.into(),
        grade_item_name: item,
        grade_value: Some(value),
    }
}

fn selected_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

fn instance(id: usize, at_risk: bool) -> LabeledInstance {
    LabeledInstance {
        student_id: format!("s{id}"),
        section_id: "c1".into(),
        features: vec![id as f64, 0.0, 0.0, 0.0],
        at_risk,
        final_grade: if at_risk { 0.5 } else { 0.9 },
    }
}

#[test]
fn selection_respects_threshold() {
    // 4 rows: checklist missing in 1/4 (25%), the canonical four present.
    let rows: Vec<_> = (0..4)
        .map(|i| {
            let mut u = usage(&format!("s{i}"), "c1", [Some(1.0); 4].map(|v| v.map(|x| x + i as f64)));
            u.checklist_completed = (i > 0).then_some(2);
            u
        })
        .collect();
    let report = select_features(&cohort(rows, vec![]), 0.20).unwrap();
    assert!(!report.selected.contains(&"Checklist_Completed".to_string()));
    for name in FEATURE_NAMES {
        assert!(report.selected.contains(&name.to_string()), "{name} should be selected");
    }
}

#[test]
fn selection_can_fail_entirely() {
    let rows = vec![usage("s1", "c1", [None; 4])];
    assert!(matches!(
        select_features(&cohort(rows, vec![]), 0.20),
        Err(FeatureError::NoFeaturesSelected)
    ));
}

#[test]
fn normalization_maps_section_range_to_unit_interval() {
    let rows = vec![
        usage("s1", "c1", [Some(2.0), Some(2.0), Some(2.0), Some(2.0)]),
        usage("s2", "c1", [Some(6.0), Some(6.0), Some(6.0), Some(6.0)]),
        usage("s3", "c1", [Some(10.0), Some(10.0), Some(10.0), Some(10.0)]),
    ];
    let m = normalize_per_section(&cohort(rows, vec![]), &selected_names()).unwrap();
    let firsts: Vec<f64> = m.rows.iter().map(|r| r.values[0]).collect();
    assert_eq!(firsts, vec![0.0, 0.5, 1.0]);
}

#[test]
fn degenerate_section_maps_to_zero() {
    let rows = vec![
        usage("s1", "c1", [Some(5.0); 4]),
        usage("s2", "c1", [Some(5.0); 4]),
    ];
    let m = normalize_per_section(&cohort(rows, vec![]), &selected_names()).unwrap();
    assert!(m.rows.iter().all(|r| r.values.iter().all(|&v| v == 0.0)));
}

#[test]
fn normalization_is_per_section() {
    let mut rows = vec![
        usage("s1", "c1", [Some(0.0); 4]),
        usage("s2", "c1", [Some(10.0); 4]),
        usage("s3", "c2", [Some(0.0); 4]),
        usage("s4", "c2", [Some(100.0); 4]),
    ];
    rows.push(usage("s5", "c2", [Some(10.0); 4]));
    let m = normalize_per_section(&cohort(rows, vec![]), &selected_names()).unwrap();
    let v = |student: &str| {
        m.rows
            .iter()
            .find(|r| r.student_id == student)
            .unwrap()
            .values[0]
    };
    assert_eq!(v("s2"), 1.0);
    assert_eq!(v("s5"), 0.1);
}

#[test]
fn empty_section_is_an_error() {
    let rows = vec![
        usage("s1", "c1", [Some(1.0), Some(2.0), Some(3.0), Some(4.0)]),
        usage("s2", "c2", [None, Some(2.0), Some(3.0), Some(4.0)]),
    ];
    assert!(matches!(
        normalize_per_section(&cohort(rows, vec![]), &selected_names()),
        Err(FeatureError::EmptySection(s)) if s == "c2"
    ));
}

fn matrix_from_columns(columns: &[Vec<f64>]) -> FeatureMatrix {
    let n = columns[0].len();
    FeatureMatrix {
        feature_names: (0..columns.len()).map(|j| format!("f{j}")).collect(),
        rows: (0..n)
            .map(|i| FeatureRow {
                student_id: format!("s{i}"),
                section_id: "c1".into(),
                values: columns.iter().map(|c| c[i]).collect(),
            })
            .collect(),
        witnesses: vec![],
    }
}

#[test]
fn vif_of_uncorrelated_features_is_one() {
    // Balanced +-1 design: exactly orthogonal.
    let a = vec![1.0, 1.0, -1.0, -1.0];
    let b = vec![1.0, -1.0, 1.0, -1.0];
    let report = compute_vif(&matrix_from_columns(&[a, b])).unwrap();
    for entry in &report.entries {
        match entry.vif {
            VifValue::Finite(v) => assert!((v - 1.0).abs() < 1e-9, "vif {v}"),
            VifValue::Infinite => panic!("unexpected infinite VIF"),
        }
    }
}

#[test]
fn exact_linear_dependency_is_flagged_infinite() {
    let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
    let b = vec![2.0, 1.0, 4.0, 3.0, 6.0];
    let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let report = compute_vif(&matrix_from_columns(&[a, b, c])).unwrap();
    assert!(report.entries.iter().all(|e| e.vif == VifValue::Infinite));
}

#[test]
fn constant_feature_is_degenerate() {
    let a = vec![1.0, 1.0, 1.0, 1.0];
    let b = vec![1.0, 2.0, 3.0, 4.0];
    assert!(matches!(
        compute_vif(&matrix_from_columns(&[a, b])),
        Err(FeatureError::DegenerateDesign(_))
    ));
}

/// Independent OLS oracle via modified Gram-Schmidt QR, no normal equations.
fn r2_oracle(y: &[f64], predictors: &[Vec<f64>]) -> f64 {
    let n = y.len();
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0; n]];
    basis.extend(predictors.iter().cloned());
    let mut q: Vec<Vec<f64>> = Vec::new();
    for col in &basis {
        let mut v = col.clone();
        for e in &q {
            let proj: f64 = e.iter().zip(&v).map(|(a, b)| a * b).sum();
            for i in 0..n {
                v[i] -= proj * e[i];
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            q.push(v);
        }
    }
    let mut residual = y.to_vec();
    for e in &q {
        let proj: f64 = e.iter().zip(&residual).map(|(a, b)| a * b).sum();
        for i in 0..n {
            residual[i] -= proj * e[i];
        }
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = residual.iter().map(|v| v * v).sum();
    1.0 - ss_res / ss_tot
}

#[test]
fn vif_matches_qr_oracle_on_random_design() {
    let mut rng = crate::seed::rng_from(42);
    use rand::Rng;
    let columns: Vec<Vec<f64>> = (0..4)
        .map(|j| {
            (0..200)
                .map(|i| {
                    let base: f64 = rng.gen();
                    // Mild correlation between columns.
                    base + 0.3 * ((i * (j + 1)) as f64 * 0.01).sin()
                })
                .collect()
        })
        .collect();
    let report = compute_vif(&matrix_from_columns(&columns)).unwrap();
    for j in 0..4 {
        let others: Vec<Vec<f64>> = (0..4).filter(|&k| k != j).map(|k| columns[k].clone()).collect();
        let expected = 1.0 / (1.0 - r2_oracle(&columns[j], &others));
        match report.entries[j].vif {
            VifValue::Finite(v) => assert!(
                (v - expected).abs() < 1e-8,
                "feature {j}: {v} vs oracle {expected}"
            ),
            VifValue::Infinite => panic!("unexpected infinite VIF"),
        }
    }
}

fn labeled_fixture() -> (FeatureMatrix, CohortTable) {
    let rows = vec![
        usage("s1", "c1", [Some(1.0), Some(2.0), Some(3.0), Some(4.0)]),
        usage("s2", "c1", [Some(2.0), Some(3.0), Some(4.0), Some(5.0)]),
        usage("s3", "c1", [Some(3.0), Some(4.0), Some(5.0), Some(6.0)]),
        usage("s4", "c1", [Some(4.0), Some(5.0), Some(6.0), Some(7.0)]),
    ];
    let grades = vec![
        grade("s1", "c1", GradeItem::FinalCalculated, 69.9),
        grade("s2", "c1", GradeItem::FinalCalculated, 70.0),
        grade("s3", "c1", GradeItem::FinalAdjusted, 65.0),
        grade("s4", "c1", GradeItem::Other("Quiz 1".into()), 10.0),
    ];
    let c = cohort(rows, grades);
    let m = normalize_per_section(&c, &selected_names()).unwrap();
    (m, c)
}

#[test]
fn labels_use_strict_threshold_and_fallback() {
    let (m, c) = labeled_fixture();
    let (instances, dropped) = label(&m, &c, &LabelPolicy::default());
    let by_id = |id: &str| instances.iter().find(|i| i.student_id == id);
    assert!(by_id("s1").unwrap().at_risk, "69.9 is at risk");
    assert!(!by_id("s2").unwrap().at_risk, "70.0 is not at risk");
    assert!(by_id("s3").unwrap().at_risk, "adjusted fallback 65 is at risk");
    assert!(by_id("s4").is_none(), "no final grade rows drop out");
    assert_eq!(dropped, 1);
}

#[test]
fn fallback_can_be_disabled() {
    let (m, c) = labeled_fixture();
    let policy = LabelPolicy {
        fallback: false,
        ..LabelPolicy::default()
    };
    let (instances, dropped) = label(&m, &c, &policy);
    assert_eq!(instances.len(), 2);
    assert_eq!(dropped, 2);
}

#[test]
fn oversample_balances_and_copies() {
    let mut instances: Vec<LabeledInstance> = (0..100).map(|i| instance(i, false)).collect();
    instances.extend((100..120).map(|i| instance(i, true)));
    let out = oversample(&instances, 7).unwrap();
    let positives: Vec<_> = out.iter().filter(|i| i.at_risk).collect();
    assert_eq!(positives.len(), 100);
    assert_eq!(out.iter().filter(|i| !i.at_risk).count(), 100);
    let originals: std::collections::BTreeSet<&str> = instances[100..]
        .iter()
        .map(|i| i.student_id.as_str())
        .collect();
    assert!(positives.iter().all(|p| originals.contains(p.student_id.as_str())));
}

#[test]
fn oversample_leaves_balanced_data_unchanged() {
    let instances: Vec<LabeledInstance> =
        (0..10).map(|i| instance(i, i % 2 == 0)).collect();
    assert_eq!(oversample(&instances, 7).unwrap(), instances);
}

#[test]
fn oversample_rejects_single_class() {
    let instances: Vec<LabeledInstance> = (0..10).map(|i| instance(i, false)).collect();
    assert!(matches!(
        oversample(&instances, 7),
        Err(FeatureError::SingleClass)
    ));
}

#[test]
fn split_sizes_follow_floor_rule() {
    let instances: Vec<LabeledInstance> = (0..100).map(|i| instance(i, i % 5 == 0)).collect();
    let spec = SplitSpec { train_fraction: 0.8, seed: 3 };
    let (train, test) = split(&instances, &spec).unwrap();
    assert_eq!((train.len(), test.len()), (80, 20));

    let five: Vec<LabeledInstance> = (0..5).map(|i| instance(i, false)).collect();
    let (train, test) = split(&five, &spec).unwrap();
    assert_eq!((train.len(), test.len()), (4, 1));
}

#[test]
fn split_is_deterministic() {
    let instances: Vec<LabeledInstance> = (0..50).map(|i| instance(i, i % 3 == 0)).collect();
    let spec = SplitSpec { train_fraction: 0.8, seed: 11 };
    let (a_train, a_test) = split(&instances, &spec).unwrap();
    let (b_train, b_test) = split(&instances, &spec).unwrap();
    assert_eq!(a_train, b_train);
    assert_eq!(a_test, b_test);
}

#[test]
fn dataset_file_round_trip() {
    let (m, c) = labeled_fixture();
    let (instances, _) = label(&m, &c, &LabelPolicy::default());
    let file = tempfile::NamedTempFile::new().unwrap();
    write_dataset(file.path(), &m.feature_names, &instances).unwrap();
    let (names, back) = read_dataset(file.path()).unwrap();
    assert_eq!(names, m.feature_names);
    assert_eq!(back, instances);
}

proptest! {
    #[test]
    fn normalization_output_is_bounded(values in proptest::collection::vec(0u32..1000, 3..40)) {
        let rows: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                usage(
                    &format!("s{i}"),
                    "c1",
                    [Some(v as f64), Some((v / 2) as f64), Some((v * 2) as f64), Some(1.0 + v as f64)],
                )
            })
            .collect();
        let m = normalize_per_section(&cohort(rows, vec![]), &selected_names()).unwrap();
        for row in &m.rows {
            for &v in &row.values {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        // Per feature: min maps to 0 and max to 1 unless degenerate.
        for j in 0..4 {
            let col: Vec<f64> = m.rows.iter().map(|r| r.values[j]).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi > 0.0 {
                prop_assert_eq!(lo, 0.0);
                prop_assert_eq!(hi, 1.0);
            }
        }
    }

    #[test]
    fn split_partitions_input(n in 2usize..60, fraction in 0.1f64..0.95, seed_value in 0u64..50) {
        let instances: Vec<LabeledInstance> = (0..n).map(|i| instance(i, i % 2 == 0)).collect();
        let spec = SplitSpec { train_fraction: fraction, seed: seed_value };
        let (train, test) = split(&instances, &spec).unwrap();
        prop_assert_eq!(train.len(), (fraction * n as f64).floor() as usize);
        prop_assert_eq!(train.len() + test.len(), n);
        let mut ids: Vec<&str> = train.iter().chain(&test).map(|i| i.student_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
    }

    #[test]
    fn oversample_preserves_distinct_minority_rows(
        negatives in 5usize..40,
        positives in 1usize..5,
        seed_value in 0u64..50,
    ) {
        let mut instances: Vec<LabeledInstance> = (0..negatives).map(|i| instance(i, false)).collect();
        instances.extend((negatives..negatives + positives).map(|i| instance(i, true)));
        let out = oversample(&instances, seed_value).unwrap();
        let before: std::collections::BTreeSet<String> = instances
            .iter().filter(|i| i.at_risk).map(|i| i.student_id.clone()).collect();
        let after: std::collections::BTreeSet<String> = out
            .iter().filter(|i| i.at_risk).map(|i| i.student_id.clone()).collect();
        prop_assert_eq!(before, after);
        prop_assert_eq!(out.iter().filter(|i| i.at_risk).count(), negatives);
    }

    #[test]
    fn vif_is_invariant_under_affine_rescaling(
        scale in prop::sample::select(vec![0.5f64, 2.0, -3.0, 10.0]),
        shift in -5.0f64..5.0,
    ) {
        let mut rng = crate::seed::rng_from(9);
        use rand::Rng;
        let columns: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..60).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let base = compute_vif(&matrix_from_columns(&columns)).unwrap();
        let mut scaled = columns.clone();
        for v in scaled[1].iter_mut() {
            *v = scale * *v + shift;
        }
        let rescaled = compute_vif(&matrix_from_columns(&scaled)).unwrap();
        for (a, b) in base.entries.iter().zip(&rescaled.entries) {
            match (&a.vif, &b.vif) {
                (VifValue::Finite(x), VifValue::Finite(y)) => prop_assert!((x - y).abs() < 1e-6),
                _ => prop_assert!(false, "unexpected infinite VIF"),
            }
        }
    }
}
