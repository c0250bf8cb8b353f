mod common;

use common::*;
use proptest::prelude::*;
use protfit::eval::{
    auc, bootstrap_diff_stderr, build_report, mcc, ndcg, spearman, top_fraction_recall, MetricReport,
    RowKind, ScoredAssay, Threshold,
};
use rand::Rng;

/// Random instance with deliberate ties in both columns.
fn instance(r: &mut impl Rng) -> (Vec<f64>, Vec<f64>, Vec<u8>) {
    let n = r.random_range(4..40);
    let grid = r.random_bool(0.5);
    let draw = |r: &mut dyn rand::RngCore| {
        let x: f64 = r.random_range(-3.0..3.0);
        if grid {
            x.round()
        } else {
            x
        }
    };
    let s: Vec<f64> = (0..n).map(|_| draw(r)).collect();
    let y: Vec<f64> = (0..n).map(|_| draw(r)).collect();
    let m = naive_median(&y);
    let mut l: Vec<u8> = y.iter().map(|&v| u8::from(v > m)).collect();
    if l.iter().all(|&v| v == l[0]) {
        l[0] ^= 1;
    }
    (s, y, l)
}

#[test]
fn metrics_match_brute_force_oracles() {
    let mut r = rng(1);
    let mut checked = 0;
    for _ in 0..500 {
        let (s, y, l) = instance(&mut r);
        if let Ok(got) = spearman(&s, &y) {
            assert!((got - naive_spearman(&s, &y)).abs() < 1e-12);
            checked += 1;
        }
        assert!((auc(&s, &l).unwrap() - naive_auc(&s, &l)).abs() < 1e-12);
        assert!((mcc(&s, &l, Threshold::Median).unwrap() - naive_mcc(&s, &l)).abs() < 1e-12);
        assert!((ndcg(&s, &y).unwrap() - naive_ndcg(&s, &y)).abs() < 1e-12);
        assert_eq!(top_fraction_recall(&s, &y, 0.1).unwrap(), naive_recall(&s, &y, 0.1));
    }
    assert!(checked > 400);
}

#[test]
fn signed_zeros_tie() {
    let s = [-0.0, 0.0, 1.0, -0.0];
    let y = [1.0, 2.0, 3.0, 0.0];
    assert_eq!(protfit::eval::mid_ranks(&s), vec![2.0, 2.0, 4.0, 2.0]);
    assert_eq!(protfit::eval::descending_order(&s), vec![2, 0, 1, 3]);
    assert!((ndcg(&s, &y).unwrap() - naive_ndcg(&s, &y)).abs() < 1e-15);
}

#[test]
fn perfect_and_reversed_rankings() {
    let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let l: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
    assert_eq!(spearman(&y, &y).unwrap(), 1.0);
    assert_eq!(auc(&y, &l).unwrap(), 1.0);
    assert_eq!(mcc(&y, &l, Threshold::Median).unwrap(), 1.0);
    assert!((ndcg(&y, &y).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(top_fraction_recall(&y, &y, 0.1).unwrap(), 1.0);
    let rev: Vec<f64> = y.iter().map(|v| -v).collect();
    assert_eq!(spearman(&rev, &y).unwrap(), -1.0);
    assert_eq!(auc(&rev, &l).unwrap(), 0.0);
    assert_eq!(top_fraction_recall(&rev, &y, 0.1).unwrap(), 0.0);
    // degenerate inputs
    assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(auc(&[1.0, 2.0], &[1, 1]).is_err());
    assert_eq!(ndcg(&[1.0, 2.0], &[5.0, 5.0]).unwrap(), 1.0);
    assert_eq!(auc(&[0.3; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
    assert_eq!(ndcg(&[0.3], &[5.0]).unwrap(), 1.0);
    let x = [1.0, 2.0, 2.0, 3.0];
    assert!((spearman(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - naive_spearman(&x, &[1.0, 3.0, 2.0, 4.0])).abs() < 1e-12);
}

proptest! {
    #[test]
    fn monotone_transforms_leave_metrics_unchanged(seed in any::<u64>(), a in 0.1f64..5.0, b in -10.0f64..10.0) {
        let (s, y, l) = instance(&mut rng(seed));
        let t: Vec<f64> = s.iter().map(|v| (a * v).exp() + b).collect();
        prop_assert_eq!(spearman(&s, &y).ok(), spearman(&t, &y).ok());
        prop_assert_eq!(auc(&s, &l).unwrap(), auc(&t, &l).unwrap());
        prop_assert_eq!(mcc(&s, &l, Threshold::Median).unwrap(), mcc(&t, &l, Threshold::Median).unwrap());
        prop_assert_eq!(ndcg(&s, &y).unwrap(), ndcg(&t, &y).unwrap());
        prop_assert_eq!(top_fraction_recall(&s, &y, 0.1).unwrap(), top_fraction_recall(&t, &y, 0.1).unwrap());
    }

    #[test]
    fn spearman_is_symmetric_and_auc_complements(seed in any::<u64>()) {
        let (s, y, l) = instance(&mut rng(seed));
        if let (Ok(a), Ok(b)) = (spearman(&s, &y), spearman(&y, &s)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let flipped: Vec<u8> = l.iter().map(|v| 1 - v).collect();
        prop_assert!((auc(&s, &l).unwrap() + auc(&s, &flipped).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auc(&s, &l).unwrap() + auc(&neg, &l).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bootstrap_matches_the_analytic_standard_error() {
    let mut r = rng(2);
    assert_eq!(bootstrap_diff_stderr(&[0.1, 0.4, 0.3], &[0.1, 0.4, 0.3], 10_000, 0).unwrap(), 0.0);
    let (a, b) = ([0.41, 0.52, 0.33, 0.60, 0.47], [0.38, 0.55, 0.21, 0.49, 0.50]);
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let got = bootstrap_diff_stderr(&a, &b, 100_000, 7).unwrap();
    assert!((got / (naive_pop_std(&d) / 5f64.sqrt()) - 1.0).abs() < 0.05);
    assert_eq!(got, bootstrap_diff_stderr(&a, &b, 100_000, 7).unwrap());
    for trial in 0..5 {
        let n = 8 + 4 * trial;
        let a: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let analytic = naive_pop_std(&d) / (n as f64).sqrt();
        let got = bootstrap_diff_stderr(&a, &b, 10_000, trial as u64).unwrap();
        assert!((got / analytic - 1.0).abs() < 0.05, "n={n}: {got} vs {analytic}");
    }
}

fn assay(name: &str, scores: Vec<f64>, dms: Vec<f64>) -> ScoredAssay {
    let m = naive_median(&dms);
    let labels = dms.iter().map(|&d| u8::from(d > m)).collect();
    ScoredAssay { name: name.into(), scores, dms, labels, groups: None }
}

#[test]
fn aggregate_is_the_unweighted_mean_over_assays() {
    let y: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let a = assay("a", vec![1.0, 3.0, 0.0, 4.0, 2.0], y.clone());
    let b = assay("b", vec![1.0, 0.0, 2.0, 4.0, 3.0], y.clone());
    let sa = spearman(&a.scores, &y).unwrap();
    let sb = spearman(&b.scores, &y).unwrap();
    let report = build_report(&[a, b], "h").unwrap();
    let agg = report.aggregate_row().unwrap();
    assert!((agg.spearman.unwrap() - (sa + sb) / 2.0).abs() < 1e-15);
    // exact 0.4 and 0.6 rows average to 0.5
    let mut rows = report.rows.clone();
    rows[0].spearman = Some(0.4);
    rows[1].spearman = Some(0.6);
    let agg = protfit::eval::aggregate("all", RowKind::Aggregate, &rows[..2]);
    assert!((agg.spearman.unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn group_rows_follow_the_keys() {
    let mut r = rng(4);
    let scores: Vec<f64> = (0..30).map(|_| r.random_range(0.0..1.0)).collect();
    let dms: Vec<f64> = (0..30).map(|_| r.random_range(0.0..1.0)).collect();
    let mut a = assay("a", scores.clone(), dms.clone());
    a.groups = Some((0..30).map(|i| if i % 3 == 0 { "2".into() } else { "1".into() }).collect());
    let report = build_report(&[a], "h").unwrap();
    let kinds: Vec<RowKind> = report.rows.iter().map(|r| r.kind).collect();
    assert_eq!(kinds, vec![RowKind::Assay, RowKind::Group, RowKind::Group, RowKind::Aggregate]);
    let g2: Vec<usize> = (0..30).filter(|i| i % 3 == 0).collect();
    let pick = |x: &[f64]| g2.iter().map(|&i| x[i]).collect::<Vec<_>>();
    assert!((report.rows[2].spearman.unwrap() - naive_spearman(&pick(&scores), &pick(&dms))).abs() < 1e-12);
    assert_eq!(report.rows[2].n_variants, 10);
}

#[test]
fn report_converts_between_csv_and_json() {
    let mut r = rng(5);
    let assays: Vec<ScoredAssay> = (0..3)
        .map(|k| {
            let s: Vec<f64> = (0..25).map(|_| r.random_range(0.0..1.0)).collect();
            let y: Vec<f64> = (0..25).map(|_| r.random_range(0.0..1.0)).collect();
            assay(&format!("a{k}"), s, y)
        })
        .collect();
    let report = build_report(&assays, "cafe").unwrap();
    let from_csv = MetricReport::from_csv(&report.to_csv().unwrap()).unwrap();
    assert_eq!(from_csv, report);
    let json = from_csv.to_json().unwrap();
    assert_eq!(MetricReport::from_json(&json).unwrap(), report);
    assert!(json.contains("\"config_hash\": \"cafe\""));
}
