//! Exact rational metrics from raw (truth, prediction) pairs.

use banknote_core::metrics::Fraction;
use banknote_core::rng::DetRng;
use num_rational::Ratio;

/// Exact metrics recomputed from the raw prediction pairs.
pub struct Oracle {
    pub precision: Vec<Option<Ratio<u64>>>,
    pub recall: Vec<Option<Ratio<u64>>>,
    pub f1: Vec<Option<Ratio<u64>>>,
    pub accuracy: Ratio<u64>,
}

pub fn ratio(n: u64, d: u64) -> Option<Ratio<u64>> {
    (d != 0).then(|| Ratio::new(n, d))
}

pub fn oracle(pairs: &[(usize, usize)], k: usize) -> Oracle {
    let mut o = Oracle {
        precision: vec![],
        recall: vec![],
        f1: vec![],
        accuracy: Ratio::from_integer(0),
    };
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as u64;
        let fp = pairs.iter().filter(|&&(t, p)| t != c && p == c).count() as u64;
        let fn_ = pairs.iter().filter(|&&(t, p)| t == c && p != c).count() as u64;
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        o.precision.push(p);
        o.recall.push(r);
        // harmonic mean of P and R when both are positive, otherwise 0 if defined
        o.f1.push(match (p, r) {
            (Some(p), Some(r)) if p + r > Ratio::from_integer(0) => {
                Some(Ratio::from_integer(2) * p * r / (p + r))
            }
            _ if tp + fp + fn_ > 0 => Some(Ratio::from_integer(0)),
            _ => None,
        });
    }
    let correct = pairs.iter().filter(|&&(t, p)| t == p).count() as u64;
    o.accuracy = Ratio::new(correct, (pairs.len() as u64).max(1));
    o
}

pub fn same(f: Fraction, want: Option<Ratio<u64>>) -> bool {
    match want {
        None => !f.is_defined(),
        Some(r) => f.is_defined() && Ratio::new(f.num, f.den) == r,
    }
}

pub fn to_f64(r: Option<Ratio<u64>>) -> f64 {
    r.map_or(0.0, |r| *r.numer() as f64 / *r.denom() as f64)
}

/// `n` pairs over `k` classes, skewed so some classes are never predicted.
pub fn random_pairs(rng: &mut DetRng, k: usize, n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .map(|_| {
            let t = rng.below(k as u64) as usize;
            let p = if rng.uniform(0.0, 1.0) < 0.6 {
                t
            } else {
                rng.below((k as u64).div_ceil(2)) as usize
            };
            (t, p)
        })
        .collect()
}
