mod common;

use banknote_core::augment::{self, AffineParams, AugmentConfig};
use banknote_core::rng::DetRng;
use banknote_core::Tensor;
use common::oracles::rotate_nearest;
use common::random_tensor;
use proptest::prelude::*;

/// Asymmetric 5×5 marker: every pixel distinct.
fn marker() -> Tensor<f64> {
    Tensor::from_fn([5, 5, 1], |i| (i as f64 + 1.0) / 25.0)
}

#[test]
fn rotation_90_matches_oracle() {
    let img = marker();
    let p = AffineParams {
        angle_deg: 90.0,
        ..AffineParams::IDENTITY
    };
    let got = augment::apply_affine(&img, &p).unwrap();
    assert_eq!(got, rotate_nearest(&img, 90.0));
    // a quarter turn of a square grid is a pure permutation
    for y in 0..5 {
        for x in 0..5 {
            assert_eq!(got.get(&[y, x, 0]), img.get(&[4 - x, y, 0]));
        }
    }
    let mut sorted: Vec<f64> = got.data().to_vec();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(sorted, img.data());
}

#[test]
fn rotations_match_oracle_on_rectangles() {
    let mut rng = DetRng::new(3);
    for _ in 0..40 {
        let h = 2 + rng.below(8) as usize;
        let w = 2 + rng.below(8) as usize;
        let img = random_tensor(&mut rng, &[h, w, 2], 0.0, 1.0);
        let angle = rng.uniform(0.0, 180.0);
        let p = AffineParams {
            angle_deg: angle,
            ..AffineParams::IDENTITY
        };
        assert_eq!(
            augment::apply_affine(&img, &p).unwrap(),
            rotate_nearest(&img, angle)
        );
    }
}

#[test]
fn identity_and_flip() {
    let img = marker();
    assert_eq!(
        augment::apply_affine(&img, &AffineParams::IDENTITY).unwrap(),
        img
    );
    let flipped = augment::apply_affine(
        &img,
        &AffineParams {
            flip: true,
            ..AffineParams::IDENTITY
        },
    )
    .unwrap();
    for y in 0..5 {
        for x in 0..5 {
            assert_eq!(flipped.get(&[y, x, 0]), img.get(&[y, 4 - x, 0]));
        }
    }
}

#[test]
fn zoom_in_magnifies_centre() {
    let img = marker();
    let p = AffineParams {
        zoom_x: 2.0,
        zoom_y: 2.0,
        ..AffineParams::IDENTITY
    };
    let out = augment::apply_affine(&img, &p).unwrap();
    assert_eq!(out.get(&[2, 2, 0]), img.get(&[2, 2, 0]));
    // corners sample half-way towards the centre: (0,0) → (1,1)
    assert_eq!(out.get(&[0, 0, 0]), img.get(&[1, 1, 0]));
}

#[test]
fn sampled_ranges_over_10k_draws() {
    let cfg = AugmentConfig::default();
    let mut rng = DetRng::new(42);
    let mut angles = (f64::INFINITY, f64::NEG_INFINITY);
    let mut zooms = (f64::INFINITY, f64::NEG_INFINITY);
    let mut flips = 0;
    for _ in 0..10_000 {
        let p = augment::sample_params(&cfg, &mut rng);
        angles = (angles.0.min(p.angle_deg), angles.1.max(p.angle_deg));
        zooms = (zooms.0.min(p.zoom_x), zooms.1.max(p.zoom_x));
        assert!((-0.1..=0.1).contains(&p.dx_frac) && (-0.1..=0.1).contains(&p.dy_frac));
        assert!((-0.1..=0.1).contains(&p.shear));
        assert_eq!(p.zoom_x, p.zoom_y);
        flips += usize::from(p.flip);
    }
    assert!(angles.0 >= 0.0 && angles.1 <= 180.0);
    assert!(zooms.0 >= 0.8 && zooms.1 <= 1.5);
    // ranges are actually explored
    assert!(angles.0 < 1.0 && angles.1 > 179.0);
    assert!(zooms.0 < 0.81 && zooms.1 > 1.49);
    assert!((4_500..5_500).contains(&flips));
}

#[test]
fn seed_42_is_reproducible() {
    let cfg = AugmentConfig::default();
    let a = augment::sample_params(&cfg, &mut DetRng::new(42));
    let b = augment::sample_params(&cfg, &mut DetRng::new(42));
    assert_eq!(a, b);
    let first = DetRng::new(42).next_u64();
    assert_eq!(first, DetRng::new(42).next_u64());
}

#[test]
fn offline_factor_and_labels() {
    let mut rng = DetRng::new(5);
    let items: Vec<(Tensor<f64>, usize)> = (0..7)
        .map(|i| (random_tensor(&mut rng, &[6, 6, 3], 0.0, 1.0), i % 3))
        .collect();
    let cfg = AugmentConfig::default();
    let out: Vec<_> = augment::augment_offline(&items, &cfg, 9)
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(out.len(), 70);
    for (k, (img, label)) in out.iter().enumerate() {
        assert_eq!(*label, items[k / 10].1);
        assert_eq!(img.shape(), items[k / 10].0.shape());
    }
    let once = AugmentConfig {
        oversample_factor: 1,
        ..cfg
    };
    let out: Vec<_> = augment::augment_offline(&items, &once, 9)
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(out, items);
}

#[test]
fn online_variants_are_deterministic_per_epoch() {
    let mut rng = DetRng::new(6);
    let items: Vec<(Tensor<f64>, usize)> = (0..5)
        .map(|i| (random_tensor(&mut rng, &[8, 8, 3], 0.0, 1.0), i))
        .collect();
    let cfg = AugmentConfig::default();
    let run = |epoch| -> Vec<(Tensor<f64>, usize)> {
        augment::augment_online(&items, &cfg, 77, epoch)
            .collect::<Result<_, _>>()
            .unwrap()
    };
    let e1 = run(1);
    assert_eq!(e1, run(1));
    assert_ne!(e1, run(2));
    for (i, (img, label)) in e1.iter().enumerate() {
        assert_eq!(*label, i);
        // item-level access gives the same bytes as the stream
        let one = augment::augment_one(&items[i].0, &cfg, 77, i as u64, 1).unwrap();
        let bits = |t: &Tensor<f64>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&one), bits(img));
    }
}

#[test]
fn rejects_empty_image() {
    assert!(Tensor::<f64>::new([0, 3, 3], vec![]).is_err());
}

proptest! {
    #[test]
    fn output_values_come_from_input(
        seed in any::<u64>(), h in 1usize..10, w in 1usize..10, c in 1usize..4,
    ) {
        let mut rng = DetRng::new(seed);
        let img = random_tensor(&mut rng, &[h, w, c], 0.0, 1.0);
        let p = augment::sample_params(&AugmentConfig::default(), &mut rng);
        let out = augment::apply_affine(&img, &p).unwrap();
        prop_assert_eq!(out.shape(), img.shape());
        for px in out.data().chunks(c) {
            prop_assert!(img.data().chunks(c).any(|q| q == px));
        }
    }
}
