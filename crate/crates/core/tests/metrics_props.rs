use proptest::prelude::*;
use rand::Rng;
use rxfuse::metrics::{auprc, auroc, f1_at};
use rxfuse::seed;

/// P(s_pos > s_neg) + ½·P(tie) over all pairs.
fn pairwise_auroc(s: &[f64], y: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] && !y[j] {
                pairs += 1.0;
                if s[i] > s[j] {
                    num += 1.0;
                } else if s[i] == s[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs
}

/// Average precision by sweeping every distinct score as a `≥` threshold.
fn threshold_sweep_ap(s: &[f64], y: &[bool]) -> f64 {
    let mut ts: Vec<f64> = s.to_vec();
    ts.sort_by(|a, b| b.total_cmp(a));
    ts.dedup();
    let pos = y.iter().filter(|&&l| l).count() as f64;
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in ts {
        let tp = s.iter().zip(y).filter(|(&v, &l)| v >= t && l).count() as f64;
        let fp = s.iter().zip(y).filter(|(&v, &l)| v >= t && !l).count() as f64;
        let recall = tp / pos;
        ap += (recall - prev_recall) * tp / (tp + fp);
        prev_recall = recall;
    }
    ap
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..200, 0u32..3).prop_flat_map(|(n, coarse)| {
        // coarse scores produce many ties
        let score = if coarse == 0 { (0u8..5).prop_map(|v| v as f64 / 4.0).boxed() } else { (0.0f64..1.0).boxed() };
        (proptest::collection::vec(score, n), proptest::collection::vec(any::<bool>(), n))
    })
    .prop_filter("both classes", |(_, y)| y.iter().any(|&l| l) && y.iter().any(|&l| !l))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn auroc_matches_pairwise((s, y) in instance()) {
        prop_assert!((auroc(&s, &y).unwrap() - pairwise_auroc(&s, &y)).abs() <= 1e-12);
    }

    #[test]
    fn auprc_matches_threshold_sweep((s, y) in instance()) {
        prop_assert!((auprc(&s, &y).unwrap() - threshold_sweep_ap(&s, &y)).abs() <= 1e-9);
    }

    #[test]
    fn auroc_invariant_under_monotone_maps((s, y) in instance()) {
        let a = auroc(&s, &y).unwrap();
        let maps: [fn(f64) -> f64; 3] = [|v| 3.0 * v + 1.0, |v| v.exp(), |v| (10.0 * v - 4.0).atan()];
        for f in maps {
            let t: Vec<f64> = s.iter().map(|&v| f(v)).collect();
            prop_assert_eq!(auroc(&t, &y).unwrap(), a);
        }
    }

    #[test]
    fn negated_scores_complement((s, y) in instance()) {
        let mut seen = s.clone();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        prop_assume!(seen.len() == s.len());
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auroc(&s, &y).unwrap() + auroc(&neg, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f1_is_harmonic_mean((s, y) in instance(), t in 0.0f64..1.0) {
        let r = f1_at(&s, &y, t);
        prop_assert_eq!(r.tp + r.fp + r.fn_ + r.tn, s.len());
        if r.precision + r.recall > 0.0 {
            prop_assert!((r.f1 - 2.0 * r.precision * r.recall / (r.precision + r.recall)).abs() < 1e-15);
        } else {
            prop_assert_eq!(r.f1, 0.0);
        }
    }
}

#[test]
fn perfect_classifier_auprc_is_one() {
    let y: Vec<bool> = (0..50).map(|i| i % 7 == 0).collect();
    let s: Vec<f64> = y.iter().map(|&l| if l { 0.9 } else { 0.1 }).collect();
    let prevalence = y.iter().filter(|&&l| l).count() as f64 / y.len() as f64;
    let ap = auprc(&s, &y).unwrap();
    assert_eq!(ap, 1.0);
    assert!(ap >= prevalence);
}

#[test]
fn random_scores_auprc_near_prevalence() {
    for s in 0..5 {
        let mut rng = seed::rng(s);
        let p = [0.1, 0.3, 0.5, 0.2, 0.05][s as usize];
        let y: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(p)).collect();
        let scores: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let prevalence = y.iter().filter(|&&l| l).count() as f64 / y.len() as f64;
        let ap = auprc(&scores, &y).unwrap();
        assert!((ap - prevalence).abs() <= 0.02, "seed {s}: ap {ap} vs prevalence {prevalence}");
    }
}
