#![allow(dead_code)]

pub mod counting;
pub mod gradcheck;
pub mod oracles;

use banknote_core::rng::DetRng;
use banknote_core::Tensor;

pub fn random_tensor(rng: &mut DetRng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| rng.uniform(lo, hi))
}

/// Values at least `gap` apart, so small perturbations never reorder them.
pub fn distinct_tensor(rng: &mut DetRng, shape: &[usize], gap: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut ranks: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut ranks);
    Tensor::from_fn(shape.to_vec(), |i| (ranks[i] as f64 - n as f64 / 2.0) * gap)
}

/// Values in `[lo, hi]` kept at least `margin` away from each kink.
pub fn away_from(
    rng: &mut DetRng,
    shape: &[usize],
    lo: f64,
    hi: f64,
    kinks: &[f64],
    margin: f64,
) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| loop {
        let v = rng.uniform(lo, hi);
        if kinks.iter().all(|k| (v - k).abs() > margin) {
            break v;
        }
    })
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}
