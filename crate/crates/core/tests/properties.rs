use std::rc::Rc;

use proptest::prelude::*;

use ttea::eval::{evaluate_pairs, manhattan_distance, EvalOptions};
use ttea::kg::{normalized_adjacency, Triple};
use ttea::train::{expand_seeds_bidirectional, margin_loss, NegativePair};
use ttea::{Tape, Tensor};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, cols), rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manhattan_is_a_metric(u in prop::collection::vec(-1e3..1e3f64, 1..16), seed in any::<u64>()) {
        let v: Vec<f64> = u.iter().enumerate().map(|(i, x)| x * ((seed >> (i % 60)) & 3) as f64 - 1.0).collect();
        let d = manhattan_distance(&u, &v).unwrap();
        prop_assert_eq!(d, manhattan_distance(&v, &u).unwrap());
        prop_assert!(d >= 0.0);
        prop_assert_eq!(manhattan_distance(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn metrics_are_bounded_and_order_free((f1, f2, perm) in (2usize..30).prop_flat_map(|m| {
        (matrix(m, 3), matrix(m, 3), Just((0..m).collect::<Vec<_>>()).prop_shuffle())
    })) {
        let m = f1.len();
        let pairs: Vec<(usize, usize)> = (0..m).map(|i| (i, (i * 7 + 3) % m)).collect();
        let shuffled: Vec<(usize, usize)> = perm.iter().map(|&i| pairs[i]).collect();
        let (t1, t2) = (Tensor::from_rows(&f1).unwrap(), Tensor::from_rows(&f2).unwrap());
        let a = evaluate_pairs(&pairs, &t1, &t2, &EvalOptions::default()).unwrap();
        let b = evaluate_pairs(&shuffled, &t1, &t2, &EvalOptions::default()).unwrap();
        prop_assert!(a.hits(1) <= a.hits(10) && a.hits(10) <= 1.0);
        prop_assert!(a.mrr > 0.0 && a.mrr <= 1.0 && a.mrr >= a.hits(1));
        prop_assert_eq!(a.hits(1), b.hits(1));
        prop_assert_eq!(a.hits(10), b.hits(10));
        prop_assert!((a.mrr - b.mrr).abs() < 1e-12);
    }

    #[test]
    fn segment_softmax_is_a_distribution(
        logits in prop::collection::vec(-50.0..50.0f64, 1..60),
        ids_seed in prop::collection::vec(0usize..8, 60),
    ) {
        let n = logits.len();
        let ids: Rc<[usize]> = ids_seed[..n].iter().copied().collect();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(logits));
        let y = tape.segment_softmax(x, &ids, 8).unwrap();
        let w = tape.value(y).data().to_vec();
        for s in 0..8 {
            let members: Vec<f64> = (0..n).filter(|&i| ids[i] == s).map(|i| w[i]).collect();
            if !members.is_empty() {
                prop_assert!((members.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(members.iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
        }
    }

    #[test]
    fn normalized_adjacency_is_symmetric(edges in prop::collection::vec((0usize..12, 0usize..3, 0usize..12), 0..40)) {
        let triples: Vec<Triple> = edges.iter().map(|&(h, r, t)| Triple::new(h, r, t)).collect();
        let a = normalized_adjacency(12, &triples).unwrap();
        prop_assert!(a.is_symmetric(1e-15));
        let dense = a.to_dense();
        prop_assert!(dense.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        for i in 0..12 {
            prop_assert!(dense.get(i, i) > 0.0);
        }
    }

    #[test]
    fn hinge_loss_is_nonnegative(f1 in matrix(4, 3), f2 in matrix(4, 3), margin in 0.1..5.0f64) {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_rows(&f1).unwrap());
        let b = tape.constant(Tensor::from_rows(&f2).unwrap());
        let pos = [(0, 1), (2, 3)];
        let negs = [
            NegativePair { owner: 0, pair: (0, 2) },
            NegativePair { owner: 0, pair: (3, 1) },
            NegativePair { owner: 1, pair: (2, 0) },
        ];
        let l = margin_loss(&mut tape, a, b, &pos, &negs, margin).unwrap();
        prop_assert!(tape.value(l).item() >= 0.0);
    }

    #[test]
    fn expansion_proposes_disjoint_mutual_nearest(f1 in matrix(12, 2), f2 in matrix(10, 2)) {
        let (t1, t2) = (Tensor::from_rows(&f1).unwrap(), Tensor::from_rows(&f2).unwrap());
        let train = [(0usize, 0usize), (1, 1)];
        let got = expand_seeds_bidirectional(&t1, &t2, &train);
        let mut seen1 = std::collections::HashSet::new();
        let mut seen2 = std::collections::HashSet::new();
        for &(a, b) in &got {
            prop_assert!(a > 1 && b > 1);
            prop_assert!(seen1.insert(a) && seen2.insert(b));
        }
    }
}
