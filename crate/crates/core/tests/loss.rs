mod common;

use common::{central_diff, jaccard_set_loss, lovasz_bruteforce, rel_err, rng};
use proptest::prelude::*;
use rand::Rng;
use s2seg::loss_metrics::{
    lovasz_class, lovasz_softmax, miou_accuracy, softmax, total_loss, weighted_xent, ClassWeights, ConfusionMatrix,
};
use s2seg::projection::IGNORE;
use s2seg::sphere::{BandLimit, S2Signal};

fn logits(b: usize, c: usize, values: Vec<f64>) -> S2Signal {
    S2Signal::from_vec(BandLimit::new(b).unwrap(), c, values).unwrap()
}

fn random_case(seed: u64, b: usize, c: usize) -> (Vec<f64>, Vec<u8>) {
    let mut r = rng(seed);
    let n = 4 * b * b;
    let x = (0..c * n).map(|_| r.random_range(-2.0..2.0)).collect();
    let t = (0..n).map(|_| if r.random_bool(0.15) { IGNORE } else { r.random_range(0..c as u8) }).collect();
    (x, t)
}

#[test]
fn xent_gradient_matches_finite_differences() {
    let (mut x, t) = random_case(1, 2, 5);
    let w = ClassWeights::new(vec![0.7, 1.3, 2.0, 0.9, 1.1]).unwrap();
    let (_, g) = weighted_xent(&logits(2, 5, x.clone()), &t, &w).unwrap();
    for i in 0..x.len() {
        let fd = central_diff(&mut x, i, 1e-5, |v| weighted_xent(&logits(2, 5, v.to_vec()), &t, &w).unwrap().0);
        assert!(rel_err(g[i], fd, 1e-8) < 1e-6, "coord {i}: {} vs {fd}", g[i]);
    }
}

#[test]
fn total_loss_gradient_matches_finite_differences() {
    let (mut x, t) = random_case(2, 2, 5);
    let w = ClassWeights::new(vec![1.0, 2.0, 0.5, 1.5, 1.0]).unwrap();
    let r = total_loss(&logits(2, 5, x.clone()), &t, &w).unwrap();
    for i in 0..x.len() {
        let fd = central_diff(&mut x, i, 1e-5, |v| total_loss(&logits(2, 5, v.to_vec()), &t, &w).unwrap().total);
        assert!(rel_err(r.grad[i], fd, 1e-6) < 1e-5, "coord {i}: {} vs {fd}", r.grad[i]);
    }
}

#[test]
fn total_is_sum_of_parts() {
    let (x, t) = random_case(3, 3, 4);
    let w = ClassWeights::uniform(4);
    let s = logits(3, 4, x);
    let r = total_loss(&s, &t, &w).unwrap();
    let a = weighted_xent(&s, &t, &w).unwrap().0;
    let b = lovasz_softmax(&softmax(&s), &t).unwrap().0;
    assert_eq!(r.total, a + b);
}

#[test]
fn lovasz_on_cube_vertices_is_one_minus_iou() {
    for n in 1..=6usize {
        for fg_bits in 1u32..(1 << n) {
            let fg: Vec<bool> = (0..n).map(|i| fg_bits >> i & 1 == 1).collect();
            for e_bits in 0u32..(1 << n) {
                let miss: Vec<bool> = (0..n).map(|i| e_bits >> i & 1 == 1).collect();
                let e: Vec<f64> = miss.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
                let (l, _) = lovasz_class(&e, &fg);
                assert!((l - jaccard_set_loss(&miss, &fg)).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn lovasz_softmax_on_one_hot_predictions() {
    // Every labelling and hard prediction of 6 cells over 3 classes; the
    // remaining cells of the bw-2 grid are ignored.
    let b = BandLimit::new(2).unwrap();
    let (n, cells) = (6usize, 16usize);
    let total = 3usize.pow(n as u32);
    let digits = |mut v: usize| -> Vec<u8> {
        (0..n)
            .map(|_| {
                let d = (v % 3) as u8;
                v /= 3;
                d
            })
            .collect()
    };
    for tv in 0..total {
        let t = digits(tv);
        let mut targets = vec![IGNORE; cells];
        targets[..n].copy_from_slice(&t);
        for pv in 0..total {
            let pred = digits(pv);
            let mut p = vec![0.0; 3 * cells];
            for (i, &c) in pred.iter().enumerate() {
                p[c as usize * cells + i] = 1.0;
            }
            let (l, _) = lovasz_softmax(&S2Signal::from_vec(b, 3, p).unwrap(), &targets).unwrap();
            let (mut want, mut present) = (0.0, 0);
            for c in 0..3u8 {
                if t.contains(&c) {
                    let inter = (0..n).filter(|&i| t[i] == c && pred[i] == c).count();
                    let union = (0..n).filter(|&i| t[i] == c || pred[i] == c).count();
                    present += 1;
                    want += 1.0 - inter as f64 / union as f64;
                }
            }
            assert!((l - want / present as f64).abs() < 1e-15);
        }
    }
}

#[test]
fn lovasz_matches_permutation_oracle() {
    let mut r = rng(7);
    for _ in 0..1000 {
        let n = r.random_range(1..=6usize);
        let e: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let mut fg: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        fg[r.random_range(0..n)] = true;
        let (l, _) = lovasz_class(&e, &fg);
        assert!((l - lovasz_bruteforce(&e, &fg)).abs() < 1e-12);
    }
}

#[test]
fn three_cell_two_class_softmax_matches_oracle() {
    let mut r = rng(11);
    let b = BandLimit::new(1).unwrap();
    for _ in 0..200 {
        let targets = [r.random_range(0..2u8), r.random_range(0..2u8), r.random_range(0..2u8), IGNORE];
        let q: Vec<f64> = (0..4).map(|_| r.random_range(0.0..1.0)).collect();
        let p: Vec<f64> = q.iter().chain(q.iter().map(|v| 1.0 - v).collect::<Vec<_>>().iter()).cloned().collect();
        let p = [&p[4..8], &p[0..4]].concat();
        let (l, _) = lovasz_softmax(&S2Signal::from_vec(b, 2, p.clone()).unwrap(), &targets).unwrap();
        let mut want = Vec::new();
        for c in 0..2 {
            let fg: Vec<bool> = targets[..3].iter().map(|&t| t == c as u8).collect();
            if fg.iter().any(|&f| f) {
                let e: Vec<f64> = (0..3).map(|i| if fg[i] { 1.0 - p[c * 4 + i] } else { p[c * 4 + i] }).collect();
                want.push(lovasz_bruteforce(&e, &fg));
            }
        }
        let want = want.iter().sum::<f64>() / want.len() as f64;
        assert!((l - want).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lovasz_increments_are_a_probability_budget(e in prop::collection::vec(0.0f64..1.0, 1..40), seed in 0u64..1000) {
        let mut r = rng(seed);
        let mut fg: Vec<bool> = e.iter().map(|_| r.random_bool(0.4)).collect();
        fg[0] = true;
        let (l, g) = lovasz_class(&e, &fg);
        prop_assert!(g.iter().all(|&v| v >= -1e-15));
        prop_assert!(g.iter().sum::<f64>() <= 1.0 + 1e-12);
        prop_assert!((-1e-15..=1.0 + 1e-12).contains(&l));
    }

    #[test]
    fn total_loss_is_non_negative(seed in 0u64..10_000) {
        let (x, t) = random_case(seed, 2, 5);
        if t.iter().all(|&y| y == IGNORE) {
            return Ok(());
        }
        let r = total_loss(&logits(2, 5, x), &t, &ClassWeights::uniform(5)).unwrap();
        prop_assert!(r.total > 0.0 && r.xent >= 0.0 && r.lovasz >= 0.0);
    }

    #[test]
    fn confusion_is_order_independent(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..200)) {
        let mut a = ConfusionMatrix::new(4);
        let mut b = ConfusionMatrix::new(4);
        pairs.iter().for_each(|&(t, p)| a.add(t, p));
        pairs.iter().rev().for_each(|&(t, p)| b.add(t, p));
        prop_assert_eq!(&a, &b);
        let (lo, hi) = pairs.split_at(pairs.len() / 2);
        let mut c = ConfusionMatrix::new(4);
        let mut d = ConfusionMatrix::new(4);
        lo.iter().for_each(|&(t, p)| c.add(t, p));
        hi.iter().for_each(|&(t, p)| d.add(t, p));
        c.merge(&d);
        prop_assert_eq!(&a, &c);
    }

    #[test]
    fn class_permutation_keeps_miou(pairs in prop::collection::vec((0u8..4, 0u8..4), 1..200), shift in 1u8..4) {
        let mut a = ConfusionMatrix::new(4);
        let mut b = ConfusionMatrix::new(4);
        for &(t, p) in &pairs {
            a.add(t, p);
            b.add((t + shift) % 4, (p + shift) % 4);
        }
        let (ma, mb) = (miou_accuracy(&a).unwrap(), miou_accuracy(&b).unwrap());
        prop_assert!((ma.miou - mb.miou).abs() < 1e-12);
        prop_assert_eq!(ma.accuracy, mb.accuracy);
        for k in 0..4usize {
            prop_assert_eq!(ma.iou[k], mb.iou[(k + shift as usize) % 4]);
        }
    }
}
