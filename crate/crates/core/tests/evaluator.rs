use pdfmlp_core::evaluator::{evaluate_scores, pick_threshold, EvalError, EvalReport};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

/// P(malicious score > benign score) with ties counted one half,
/// over every pair.
fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice = 0u64;
    let (mut p, mut n) = (0u64, 0u64);
    for (&s, &l) in scores.iter().zip(labels) {
        if l == 1 {
            p += 1;
            for (&b, &lb) in scores.iter().zip(labels) {
                if lb == 0 {
                    twice += match s.partial_cmp(&b).unwrap() {
                        std::cmp::Ordering::Greater => 2,
                        std::cmp::Ordering::Equal => 1,
                        std::cmp::Ordering::Less => 0,
                    };
                }
            }
        } else {
            n += 1;
        }
    }
    twice as f64 / (2 * p * n) as f64
}

fn report(scores: &[f64], labels: &[u8]) -> EvalReport {
    evaluate_scores(scores, labels, &[0.5], 0.5).unwrap()
}

#[test]
fn six_scores_at_three_quarters() {
    let scores = [0.9, 0.8, 0.3, 0.7, 0.2, 0.1];
    let labels = [1, 1, 1, 0, 0, 0];
    let r = evaluate_scores(&scores, &labels, &[0.75], 0.75).unwrap();
    let op = r.operating_point;
    assert_eq!((op.tp, op.fn_, op.fp, op.tn), (2, 1, 0, 3));
    assert_eq!(op.tpr, 2.0 / 3.0);
    assert_eq!(op.fpr, 0.0);
    assert!(r.sweep.iter().any(|p| p.threshold == 0.75 && p.tp == 2));
    // Eight of nine malicious/benign pairs are ordered correctly.
    assert_eq!(r.auc, 8.0 / 9.0);
    assert_eq!(r.auc, pairwise_auc(&scores, &labels));
}

#[test]
fn perfect_scorer() {
    let scores: Vec<f64> = (0..20).map(|i| if i < 8 { 0.99 } else { 0.01 }).collect();
    let labels: Vec<u8> = (0..20).map(|i| u8::from(i < 8)).collect();
    let r = report(&scores, &labels);
    assert_eq!((r.operating_point.tpr, r.operating_point.fpr), (1.0, 0.0));
    assert_eq!(r.auc, 1.0);
    assert_eq!((r.n_malicious, r.n_benign), (8, 12));
    let t = pick_threshold(&r, 0.001).unwrap();
    assert!(t > 0.01 && t <= 0.99, "{t}");
    assert_eq!(t, 0.99);
}

#[test]
fn constant_scorer_traces_the_diagonal() {
    let scores = vec![0.5; 10];
    let labels: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
    let r = evaluate_scores(&scores, &labels, &[0.1, 0.3, 0.7, 0.9], 0.5).unwrap();
    assert_eq!(r.roc_points, vec![(0.0, 0.0), (1.0, 1.0)]);
    assert_eq!(r.auc, 0.5);
    for p in &r.sweep {
        assert_eq!(p.tpr, p.fpr);
    }
    let t = pick_threshold(&r, 0.0).unwrap();
    assert!(t > 0.5);
    let chosen = r.sweep.iter().find(|p| p.threshold == t).unwrap();
    assert_eq!((chosen.tpr, chosen.fpr), (0.0, 0.0));
}

#[test]
fn single_class_rates_are_undefined() {
    let err = evaluate_scores(&[0.1, 0.9], &[0, 0], &[0.5], 0.5).unwrap_err();
    assert!(err.to_string().starts_with("rates undefined"));
    assert!(matches!(evaluate_scores(&[0.1, 0.9], &[0, 1], &[], 0.5), Err(EvalError::NoThresholds)));
    assert!(matches!(evaluate_scores(&[0.1, 0.9], &[0, 1], &[1.0], 0.5), Err(EvalError::InvalidThreshold(_))));
}

#[test]
fn pick_threshold_reports_the_minimum_fpr() {
    let mut r = report(&[0.9, 0.8, 0.3, 0.7, 0.2, 0.1], &[1, 1, 1, 0, 0, 0]);
    r.sweep.retain(|p| p.fpr >= 1.0 / 3.0);
    match pick_threshold(&r, 0.1) {
        Err(EvalError::NoThresholdWithin { min_fpr, .. }) => assert_eq!(min_fpr, 1.0 / 3.0),
        other => panic!("{other:?}"),
    }
    assert!(matches!(pick_threshold(&r, 1.5), Err(EvalError::InvalidMaxFpr(_))));
}

#[test]
fn pick_threshold_prefers_larger_thresholds_on_ties() {
    let r = evaluate_scores(&[0.9, 0.8, 0.3, 0.7, 0.2, 0.1], &[1, 1, 1, 0, 0, 0], &[0.72, 0.75, 0.79], 0.5).unwrap();
    // 0.71 .. 0.8 all give TPR 2/3 at FPR 0; 0.8 is the largest such point.
    assert_eq!(pick_threshold(&r, 0.0).unwrap(), 0.8);
    assert_eq!(pick_threshold(&r, 0.34).unwrap(), 0.3);
}

/// Benign scores N(0, 1), malicious N(d, 1), squashed into (0, 1) by a
/// logistic map that leaves the ROC unchanged. For this binormal model
/// AUC = Phi(d / sqrt 2) and TPR(fpr) = 1 - Phi(Phi^-1(1 - fpr) - d).
#[test]
fn binormal_scores_show_a_steep_low_fpr_curve() {
    let std_normal = StatNormal::new(0.0, 1.0).unwrap();
    let d = 2f64.sqrt() * std_normal.inverse_cdf(0.99);
    let tpr_at = |fpr: f64| 1.0 - std_normal.cdf(std_normal.inverse_cdf(1.0 - fpr) - d);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let benign = Normal::new(0.0, 1.0).unwrap();
    let malicious = Normal::new(d, 1.0).unwrap();
    let squash = |z: f64| 1.0 / (1.0 + (-z / 3.0).exp());
    let (n_ben, n_mal) = (200_000, 40_000);
    let mut scores = Vec::with_capacity(n_ben + n_mal);
    let mut labels = Vec::with_capacity(n_ben + n_mal);
    for _ in 0..n_ben {
        scores.push(squash(benign.sample(&mut rng)));
        labels.push(0);
    }
    for _ in 0..n_mal {
        scores.push(squash(malicious.sample(&mut rng)));
        labels.push(1);
    }
    let r = evaluate_scores(&scores, &labels, &[0.5], 0.5).unwrap();
    assert!((r.auc - 0.99).abs() < 0.002, "auc {}", r.auc);

    let tpr_for = |max_fpr: f64| {
        let t = pick_threshold(&r, max_fpr).unwrap();
        r.sweep.iter().find(|p| p.threshold == t).unwrap().tpr
    };
    let (low, high) = (tpr_for(1e-3), tpr_for(1e-2));
    assert!((low - tpr_at(1e-3)).abs() < 0.03, "{low} vs {}", tpr_at(1e-3));
    assert!((high - tpr_at(1e-2)).abs() < 0.02, "{high} vs {}", tpr_at(1e-2));
    assert!(high - low > 0.2, "tpr {low} at 1e-3, {high} at 1e-2");
}

fn scored_set() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (1usize..200, 1usize..200).prop_flat_map(|(p, n)| {
        // A coarse grid forces plenty of tied scores.
        let score = prop_oneof![(0u32..20).prop_map(|k| f64::from(k) / 20.0 + 0.01), 0.0f64..1.0];
        (
            proptest::collection::vec(score.clone(), p),
            proptest::collection::vec(score, n),
        )
            .prop_map(|(mal, ben)| {
                let labels = std::iter::repeat_n(1u8, mal.len()).chain(std::iter::repeat_n(0u8, ben.len())).collect();
                (mal.into_iter().chain(ben).collect(), labels)
            })
    })
}

proptest! {
    #[test]
    fn auc_matches_pairwise_probability((scores, labels) in scored_set()) {
        let r = report(&scores, &labels);
        let brute = pairwise_auc(&scores, &labels);
        prop_assert!((r.auc - brute).abs() <= 1e-12, "{} vs {}", r.auc, brute);
        prop_assert!((0.0..=1.0).contains(&r.auc));
    }

    #[test]
    fn sweep_rates_are_monotone_and_complementary((scores, labels) in scored_set(), extra in proptest::collection::vec(0.001f64..0.999, 1..10)) {
        let r = evaluate_scores(&scores, &labels, &extra, 0.62).unwrap();
        for w in r.sweep.windows(2) {
            prop_assert!(w[0].threshold < w[1].threshold);
            prop_assert!(w[1].fpr <= w[0].fpr);
            prop_assert!(w[1].fnr >= w[0].fnr);
        }
        for p in &r.sweep {
            prop_assert_eq!(p.tpr + p.fnr, 1.0);
            prop_assert_eq!(p.tnr() + p.fpr, 1.0);
        }
        for w in r.roc_points.windows(2) {
            prop_assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        }
        prop_assert_eq!(r.roc_points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(r.roc_points.last().copied(), Some((1.0, 1.0)));
    }

    #[test]
    fn row_order_does_not_matter((scores, labels) in scored_set(), seed in any::<u64>()) {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let s2: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l2: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        prop_assert_eq!(report(&scores, &labels), report(&s2, &l2));
    }
}
