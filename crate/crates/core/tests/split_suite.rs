use std::collections::BTreeSet;

use banknote_core::rng::DetRng;
use banknote_core::split::{stratified_split, Split, SplitRatios};
use proptest::prelude::*;

fn count(labels: &[usize], s: &[Split], class: usize, want: Split) -> usize {
    labels
        .iter()
        .zip(s)
        .filter(|&(&l, &x)| l == class && x == want)
        .count()
}

#[test]
fn ten_per_class_gives_8_1_1() {
    let labels: Vec<usize> = (0..90).map(|i| i % 9).collect();
    let s = stratified_split(&labels, 9, SplitRatios::default(), 11).unwrap();
    for c in 0..9 {
        let got: Vec<usize> = [Split::Train, Split::Val, Split::Test]
            .iter()
            .map(|&w| count(&labels, &s, c, w))
            .collect();
        assert_eq!(got, [8, 1, 1], "class {c}");
    }
}

#[test]
fn nine_class_1970_items_match_floor_counts() {
    let sizes = [220, 219, 219, 219, 219, 219, 219, 218, 218];
    assert_eq!(sizes.iter().sum::<usize>(), 1970);
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| vec![c; n])
        .collect();
    let s = stratified_split(&labels, 9, SplitRatios::default(), 0).unwrap();
    for (c, &n) in sizes.iter().enumerate() {
        // integer floor of n/10 for both held-out splits
        let held = n / 10;
        assert_eq!(count(&labels, &s, c, Split::Val), held);
        assert_eq!(count(&labels, &s, c, Split::Test), held);
        assert_eq!(count(&labels, &s, c, Split::Train), n - 2 * held);
    }
}

#[test]
fn seed_changes_assignment_not_counts() {
    let labels: Vec<usize> = (0..200).map(|i| i % 4).collect();
    let a = stratified_split(&labels, 4, SplitRatios::default(), 1).unwrap();
    let b = stratified_split(&labels, 4, SplitRatios::default(), 2).unwrap();
    assert_ne!(a, b);
    for c in 0..4 {
        for w in [Split::Train, Split::Val, Split::Test] {
            assert_eq!(count(&labels, &a, c, w), count(&labels, &b, c, w));
        }
    }
}

#[test]
fn split_names_round_trip() {
    for s in [Split::Train, Split::Val, Split::Test] {
        assert_eq!(s.to_string().parse::<Split>().unwrap(), s);
    }
    assert!("holdout".parse::<Split>().is_err());
}

proptest! {
    #[test]
    fn partition_is_complete_and_deterministic(
        seed in any::<u64>(),
        sizes in prop::collection::vec(0usize..40, 1..6),
        val in 0.0f64..0.4,
        test in 0.0f64..0.4,
    ) {
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect();
        let mut rng = DetRng::new(seed);
        let mut shuffled = labels.clone();
        rng.shuffle(&mut shuffled);
        let ratios = SplitRatios::new(1.0 - val - test, val, test).unwrap();
        let s = stratified_split(&shuffled, sizes.len(), ratios, seed).unwrap();
        prop_assert_eq!(s.len(), shuffled.len());
        prop_assert_eq!(&s, &stratified_split(&shuffled, sizes.len(), ratios, seed).unwrap());
        for (c, &n) in sizes.iter().enumerate() {
            let (tr, va, te) = ratios.counts(n);
            prop_assert_eq!(tr + va + te, n);
            prop_assert_eq!(count(&shuffled, &s, c, Split::Val), va);
            prop_assert_eq!(count(&shuffled, &s, c, Split::Test), te);
            prop_assert_eq!(count(&shuffled, &s, c, Split::Train), tr);
            let nf = n as f64;
            prop_assert!((va as f64 - val * nf).abs() < 1.0 + 1e-9);
            prop_assert!((te as f64 - test * nf).abs() < 1.0 + 1e-9);
            prop_assert!((tr as f64 - ratios.train * nf).abs() < 2.0 + 1e-9);
        }
        let used: BTreeSet<Split> = s.iter().copied().collect();
        prop_assert!(used.len() <= 3);
    }
}
