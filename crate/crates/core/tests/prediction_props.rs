use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rspace_core::prediction_eval::{
    auroc, compare_models, cv_sliding, evaluate_transitions, summarize, CandidatePolicy,
    RankedPrediction,
};
use rspace_core::{
    EntityKind, FieldId, ModelTag, ProximityMatrix, ResolvedCorpus, TimeWindow, TransitionKind,
};

fn ranked(scores: &[f64]) -> RankedPrediction {
    let mut ranked: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    RankedPrediction { entity: 0, ranked }
}

fn distinct_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2..30usize).prop_flat_map(|n| {
        (
            prop::collection::btree_set(0u32..10_000, n)
                .prop_map(|s| {
                    s.into_iter()
                        .map(|v| v as f64 / 10_000.0)
                        .collect::<Vec<_>>()
                })
                .prop_shuffle(),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

fn positives(labels: &[bool], want: bool) -> BTreeSet<usize> {
    (0..labels.len()).filter(|&i| labels[i] == want).collect()
}

proptest! {
    #[test]
    fn auroc_ignores_monotone_transforms((scores, labels) in distinct_scores()) {
        let pos = positives(&labels, true);
        let a = auroc(&ranked(&scores), &pos);
        let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        let b = auroc(&ranked(&transformed), &pos);
        prop_assert_eq!(a.map(|r| r.auroc), b.map(|r| r.auroc));
    }

    #[test]
    fn complement_labels_give_one_minus((scores, labels) in distinct_scores()) {
        let r = ranked(&scores);
        if let (Some(a), Some(b)) = (auroc(&r, &positives(&labels, true)), auroc(&r, &positives(&labels, false))) {
            prop_assert!((a.auroc + b.auroc - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn swapping_score_lists_gives_one_minus((scores, labels) in distinct_scores()) {
        let pos = positives(&labels, true);
        prop_assume!(!pos.is_empty() && pos.len() < labels.len());
        // reflecting the scores swaps which side of every pair wins
        let swapped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
        let a = auroc(&ranked(&scores), &pos).unwrap().auroc;
        let b = auroc(&ranked(&swapped), &pos).unwrap().auroc;
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summary_ignores_order(mut v in prop::collection::vec(0.0f64..=1.0, 1..60), seed in any::<u64>()) {
        let a = summarize(&v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..v.len()).rev() {
            v.swap(i, rng.gen_range(0..=i));
        }
        let b = summarize(&v).unwrap();
        prop_assert_eq!(a.median, b.median);
        prop_assert_eq!(a.q1, b.q1);
        prop_assert_eq!(a.q3, b.q3);
        prop_assert!((a.mean - b.mean).abs() < 1e-12);
    }
}

#[test]
fn hand_auroc_values() {
    let r = ranked(&[0.6, 0.2, 0.5, 0.4, 0.1]);
    let got = auroc(&r, &[0, 1].into()).unwrap();
    assert!((got.auroc - 4.0 / 6.0).abs() < 1e-12);
    assert_eq!((got.n_pos, got.n_neg), (2, 3));

    let tied = ranked(&[0.3; 4]);
    assert_eq!(auroc(&tied, &[2].into()).unwrap().auroc, 0.5);
    assert!(auroc(&tied, &BTreeSet::new()).is_none());
}

/// Type-7 quantile, written from the definition.
fn oracle_quantile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() as f64 - 1.0);
    let i = pos as usize;
    if i + 1 >= s.len() {
        return s[s.len() - 1];
    }
    s[i] * (1.0 - (pos - i as f64)) + s[i + 1] * (pos - i as f64)
}

#[test]
fn quantiles_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v: Vec<f64> = (0..100).map(|_| rng.gen()).collect();
    let s = summarize(&v).unwrap();
    assert_eq!(s.n, 100);
    assert!((s.median - oracle_quantile(&v, 0.5)).abs() < 1e-12);
    assert!((s.q1 - oracle_quantile(&v, 0.25)).abs() < 1e-12);
    assert!((s.q3 - oracle_quantile(&v, 0.75)).abs() < 1e-12);
    assert!((s.mean - v.iter().sum::<f64>() / 100.0).abs() < 1e-12);

    let pair = summarize(&[0.0, 1.0]).unwrap();
    assert_eq!((pair.mean, pair.median), (0.5, 0.5));
    assert!(summarize(&[]).is_err());
}

#[test]
fn cv_matches_direct_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pairs: Vec<(f64, f64)> = (0..2000)
        .map(|i| (i as f64, rng.gen_range(0.1..1.0)))
        .collect();
    let curve = cv_sliding(&pairs, 1000).unwrap();
    assert_eq!(curve.points.len(), 1001);
    assert_eq!(curve.skipped, 0);
    for (start, &(mid, cv)) in curve.points.iter().enumerate() {
        let w: Vec<f64> = pairs[start..start + 1000].iter().map(|p| p.1).collect();
        let m = w.iter().sum::<f64>() / 1000.0;
        let sd = (w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 999.0).sqrt();
        assert!((cv - sd / m).abs() < 1e-12);
        assert_eq!(mid, (start as f64 + start as f64 + 999.0) / 2.0);
    }

    let constant: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.7)).collect();
    assert!(cv_sliding(&constant, 4)
        .unwrap()
        .points
        .iter()
        .all(|p| p.1 == 0.0));
    assert!(cv_sliding(&constant, 11).is_err());
}

#[test]
fn permutation_test_examples() {
    let a = vec![0.9; 50];
    let b = vec![0.1; 50];
    assert!(compare_models(&a, &b, 10_000, 1).unwrap() < 0.01);
    assert!(compare_models(&a, &a, 200, 1).unwrap() > 0.99);
    assert!(compare_models(&a, &b, 99, 1).unwrap_err().is_config());

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x: Vec<f64> = (0..80).map(|_| rng.gen()).collect();
    let mut y = x.clone();
    y.reverse();
    assert!(compare_models(&x, &y, 1000, 2).unwrap() > 0.05);
}

#[test]
fn separating_proximity_scores_every_transition_first() {
    // fields 0..4; scientist "a" works in field 0 then enters field 1, which
    // only field 0 points to
    let fields: Vec<FieldId> = (0..4).map(FieldId).collect();
    let mut rows = Vec::new();
    for y in 2000..=2002 {
        rows.push(("a".to_string(), vec![FieldId(0)], 1, y));
        rows.push(("b".to_string(), vec![FieldId(2), FieldId(3)], 1, y));
    }
    for y in 2003..=2004 {
        rows.push(("a".to_string(), vec![FieldId(0), FieldId(1)], 1, y));
        rows.push(("b".to_string(), vec![FieldId(2), FieldId(3)], 1, y));
    }
    let corpus = ResolvedCorpus::from_tuples(EntityKind::Scientist, fields.clone(), rows).unwrap();
    let mut phi = vec![0.0; 16];
    for f in 0..4 {
        phi[f * 4 + f] = 1.0;
    }
    phi[4] = 0.9;
    phi[1] = 0.9;
    let rca_w = TimeWindow::new(2000, 2002).unwrap();
    let test_w = TimeWindow::new(2003, 2004).unwrap();
    let phi =
        ProximityMatrix::from_dense(Arc::new(fields), phi, ModelTag::Embedding, rca_w).unwrap();
    let eval = evaluate_transitions(
        &corpus,
        &phi,
        rca_w,
        test_w,
        TransitionKind::ZeroToActive,
        CandidatePolicy::SourceStage,
    )
    .unwrap();
    assert_eq!(eval.n_transitioned, 1);
    assert_eq!(eval.aurocs(), vec![1.0]);
    assert_eq!(eval.entities[0].result.n_neg, 2);

    let overlapping = TimeWindow::new(2002, 2004).unwrap();
    let err = evaluate_transitions(
        &corpus,
        &phi,
        rca_w,
        overlapping,
        TransitionKind::ZeroToActive,
        CandidatePolicy::SourceStage,
    );
    assert!(err.unwrap_err().is_config());
}
