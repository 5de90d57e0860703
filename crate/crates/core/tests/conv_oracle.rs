mod common;

use banknote_core::ops::{self, ConvGeometry, Padding};
use banknote_core::rng::DetRng;
use banknote_core::Tensor;
use common::{max_abs_diff, oracles, random_tensor};
use proptest::prelude::*;

struct Case {
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    same: bool,
}

fn random_case(rng: &mut DetRng) -> Case {
    loop {
        let c = Case {
            h: 1 + rng.below(9) as usize,
            w: 1 + rng.below(9) as usize,
            cin: 1 + rng.below(4) as usize,
            cout: 1 + rng.below(4) as usize,
            kh: 1 + rng.below(4) as usize,
            kw: 1 + rng.below(4) as usize,
            stride: 1 + rng.below(3) as usize,
            same: rng.coin(),
        };
        if c.same || (c.h >= c.kh && c.w >= c.kw) {
            return c;
        }
    }
}

fn geometry(c: &Case) -> ConvGeometry {
    let padding = if c.same {
        Padding::Same
    } else {
        Padding::Valid
    };
    ConvGeometry::new(c.kh, c.kw, c.stride, padding)
}

#[test]
fn conv_paths_match_direct_summation() {
    let mut rng = DetRng::new(11);
    for _ in 0..300 {
        let c = random_case(&mut rng);
        let x = random_tensor(&mut rng, &[c.h, c.w, c.cin], -1.0, 1.0);
        let k = random_tensor(&mut rng, &[c.kh, c.kw, c.cin, c.cout], -1.0, 1.0);
        let b = random_tensor(&mut rng, &[c.cout], -1.0, 1.0);
        let (want, oh, ow) = oracles::conv(
            x.data(),
            (c.h, c.w, c.cin),
            k.data(),
            (c.kh, c.kw, c.cout),
            b.data(),
            c.stride,
            c.same,
        );
        let g = geometry(&c);
        for got in [
            ops::conv2d(&x, &k, &b, &g).unwrap(),
            ops::conv2d_direct(&x, &k, &b, &g).unwrap(),
        ] {
            assert_eq!(got.shape(), &[oh, ow, c.cout]);
            assert!(max_abs_diff(got.data(), &want) <= 1e-12);
        }
    }
}

#[test]
fn conv_f32_matches_oracle() {
    let mut rng = DetRng::new(12);
    for _ in 0..100 {
        let c = random_case(&mut rng);
        let x = random_tensor(&mut rng, &[c.h, c.w, c.cin], -1.0, 1.0);
        let k = random_tensor(&mut rng, &[c.kh, c.kw, c.cin, c.cout], -1.0, 1.0);
        let b = random_tensor(&mut rng, &[c.cout], -1.0, 1.0);
        let (want, _, _) = oracles::conv(
            x.data(),
            (c.h, c.w, c.cin),
            k.data(),
            (c.kh, c.kw, c.cout),
            b.data(),
            c.stride,
            c.same,
        );
        let got = ops::conv2d(&x.cast::<f32>(), &k.cast(), &b.cast(), &geometry(&c)).unwrap();
        let got: Vec<f64> = got.data().iter().map(|&v| v as f64).collect();
        assert!(max_abs_diff(&got, &want) <= 1e-5);
    }
}

#[test]
fn depthwise_matches_oracle() {
    let mut rng = DetRng::new(13);
    for _ in 0..150 {
        let c = random_case(&mut rng);
        let x = random_tensor(&mut rng, &[c.h, c.w, c.cin], -1.0, 1.0);
        let k = random_tensor(&mut rng, &[c.kh, c.kw, c.cin], -1.0, 1.0);
        let b = random_tensor(&mut rng, &[c.cin], -1.0, 1.0);
        let want = oracles::depthwise(
            x.data(),
            (c.h, c.w, c.cin),
            k.data(),
            (c.kh, c.kw),
            b.data(),
            c.stride,
            c.same,
        );
        let got = ops::depthwise_conv2d(&x, &k, &b, &geometry(&c)).unwrap();
        assert!(max_abs_diff(got.data(), &want) <= 1e-12);
    }
}

#[test]
fn depthwise_equals_grouped_full_conv() {
    // depthwise == full conv with a block-diagonal kernel
    let mut rng = DetRng::new(14);
    for _ in 0..50 {
        let c = random_case(&mut rng);
        let x = random_tensor(&mut rng, &[c.h, c.w, c.cin], -1.0, 1.0);
        let k = random_tensor(&mut rng, &[c.kh, c.kw, c.cin], -1.0, 1.0);
        let b = random_tensor(&mut rng, &[c.cin], -1.0, 1.0);
        let mut full = Tensor::<f64>::zeros([c.kh, c.kw, c.cin, c.cin]);
        for ky in 0..c.kh {
            for kx in 0..c.kw {
                for ch in 0..c.cin {
                    full.set(&[ky, kx, ch, ch], k.get(&[ky, kx, ch]));
                }
            }
        }
        let g = geometry(&c);
        let a = ops::depthwise_conv2d(&x, &k, &b, &g).unwrap();
        let f = ops::conv2d(&x, &full, &b, &g).unwrap();
        assert!(max_abs_diff(a.data(), f.data()) <= 1e-12);
    }
}

#[test]
fn pointwise_equals_one_by_one_conv() {
    let mut rng = DetRng::new(15);
    for _ in 0..100 {
        let c = random_case(&mut rng);
        let x = random_tensor(&mut rng, &[c.h, c.w, c.cin], -1.0, 1.0);
        let k = random_tensor(&mut rng, &[c.cin, c.cout], -1.0, 1.0);
        let b = random_tensor(&mut rng, &[c.cout], -1.0, 1.0);
        let (want, _, _) = oracles::conv(
            x.data(),
            (c.h, c.w, c.cin),
            k.data(),
            (1, 1, c.cout),
            b.data(),
            1,
            false,
        );
        let got = ops::pointwise_conv2d(&x, &k, &b).unwrap();
        assert!(max_abs_diff(got.data(), &want) <= 1e-12);
    }
}

#[test]
fn depthwise_channel_isolation() {
    let mut rng = DetRng::new(16);
    let x = random_tensor(&mut rng, &[6, 5, 4], -1.0, 1.0);
    let k = random_tensor(&mut rng, &[3, 3, 4], -1.0, 1.0);
    let b = Tensor::zeros([4]);
    let g = ConvGeometry::square(3, 1, Padding::Same);
    let base = ops::depthwise_conv2d(&x, &k, &b, &g).unwrap();
    for ch in 0..4 {
        let mut p = x.clone();
        for y in 0..6 {
            for xx in 0..5 {
                let v = p.get(&[y, xx, ch]);
                p.set(&[y, xx, ch], v + 1.0);
            }
        }
        let out = ops::depthwise_conv2d(&p, &k, &b, &g).unwrap();
        for (i, (a, b)) in out.data().iter().zip(base.data()).enumerate() {
            if i % 4 != ch {
                assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn kernels_are_pure() {
    let mut rng = DetRng::new(17);
    let x = random_tensor(&mut rng, &[7, 7, 3], -1.0, 1.0);
    let k = random_tensor(&mut rng, &[3, 3, 3, 5], -1.0, 1.0);
    let b = random_tensor(&mut rng, &[5], -1.0, 1.0);
    let g = ConvGeometry::square(3, 2, Padding::Same);
    let a = ops::conv2d(&x, &k, &b, &g).unwrap();
    assert_eq!(a, ops::conv2d(&x, &k, &b, &g).unwrap());
}

proptest! {
    #[test]
    fn geometry_matches_formulas(
        h in 1usize..40, w in 1usize..40, k in 1usize..7, s in 1usize..5, same in any::<bool>(),
    ) {
        let padding = if same { Padding::Same } else { Padding::Valid };
        let g = ConvGeometry::square(k, s, padding);
        let got = g.output(h, w);
        if !same && (h < k || w < k) {
            prop_assert!(got.is_err());
        } else {
            let (oh, ow, pt, pl) = got.unwrap();
            let (eh, et) = oracles::axis(h, k, s, same);
            let (ew, el) = oracles::axis(w, k, s, same);
            prop_assert_eq!((oh, ow, pt, pl), (eh, ew, et, el));
            if same {
                prop_assert_eq!(oh, h.div_ceil(s));
            } else {
                prop_assert_eq!(oh, (h - k) / s + 1);
            }
            let x = Tensor::<f64>::zeros([h, w, 1]);
            let pool = ops::pool(&x, ops::PoolKind::Max(g)).unwrap();
            prop_assert_eq!(pool.shape(), &[oh, ow, 1]);
        }
    }
}
