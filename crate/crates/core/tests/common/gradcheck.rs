//! Central finite-difference checks of layer and model backward passes.

use banknote_core::ops::{self, ActivationKind, ConvGeometry, Padding, PoolKind};
use banknote_core::rng::DetRng;
use banknote_core::{LayerKind, Model, ParamStore, Tensor};

use super::{away_from, distinct_tensor, random_tensor, rel_err};

pub const STEP: f64 = 1e-4;

fn weighted_sum(
    kind: &LayerKind,
    inputs: &[Tensor<f64>],
    params: &[Tensor<f64>],
    r: &Tensor<f64>,
) -> f64 {
    let ins: Vec<&Tensor<f64>> = inputs.iter().collect();
    let ps: Vec<&Tensor<f64>> = params.iter().collect();
    let out = kind.forward(&ins, &ps).unwrap();
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn central(f: &mut dyn FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x + STEP) - f(x - STEP)) / (2.0 * STEP)
}

/// Largest relative error between analytic and numeric gradients of
/// `Σ out ⊙ R` over every input and trainable-parameter element.
pub fn check_layer(
    kind: &LayerKind,
    inputs: &[Tensor<f64>],
    params: &[Tensor<f64>],
    rng: &mut DetRng,
) -> f64 {
    let ins: Vec<&Tensor<f64>> = inputs.iter().collect();
    let ps: Vec<&Tensor<f64>> = params.iter().collect();
    let out = kind.forward(&ins, &ps).unwrap();
    let r = random_tensor(rng, out.shape(), -1.0, 1.0);
    let grads = kind.backward(&ins, &out, &ps, &r, true).unwrap();
    let shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape()).collect();
    let decls = kind.params(&shapes).unwrap();
    let mut worst: f64 = 0.0;

    for (ii, gi) in grads.grad_inputs.iter().enumerate() {
        assert_eq!(gi.shape(), inputs[ii].shape());
        for e in 0..inputs[ii].len() {
            let mut probe = inputs.to_vec();
            let mut f = |v: f64| {
                probe[ii].data_mut()[e] = v;
                weighted_sum(kind, &probe, params, &r)
            };
            let n = central(&mut f, inputs[ii].data()[e]);
            worst = worst.max(rel_err(gi.data()[e], n));
        }
    }
    assert_eq!(grads.grad_inputs.len(), inputs.len());

    for (pi, decl) in decls.iter().enumerate() {
        let analytic = grads.param(decl.suffix);
        if !decl.trainable {
            assert!(
                analytic.is_none(),
                "fixed parameter {} has a gradient",
                decl.suffix
            );
            continue;
        }
        let analytic = analytic.unwrap_or_else(|| panic!("missing gradient for {}", decl.suffix));
        for e in 0..params[pi].len() {
            let mut probe = params.to_vec();
            let mut f = |v: f64| {
                probe[pi].data_mut()[e] = v;
                weighted_sum(kind, inputs, &probe, &r)
            };
            let n = central(&mut f, params[pi].data()[e]);
            worst = worst.max(rel_err(analytic.data()[e], n));
        }
    }
    worst
}

/// Random parameters for a layer; batch-norm variances are kept positive.
pub fn random_params(
    kind: &LayerKind,
    inputs: &[Tensor<f64>],
    rng: &mut DetRng,
) -> Vec<Tensor<f64>> {
    let shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape()).collect();
    kind.params(&shapes)
        .unwrap()
        .iter()
        .map(|d| match d.suffix {
            "running_var" => random_tensor(rng, &d.shape, 0.2, 2.0),
            _ => random_tensor(rng, &d.shape, -1.0, 1.0),
        })
        .collect()
}

/// One named case per layer type.
pub fn layer_cases(rng: &mut DetRng) -> Vec<(&'static str, LayerKind, Vec<Tensor<f64>>)> {
    let same3 = ConvGeometry::square(3, 1, Padding::Same);
    let s2 = ConvGeometry::square(3, 2, Padding::Same);
    let rect = ConvGeometry::new(2, 3, 2, Padding::Valid);
    let x = |rng: &mut DetRng, s: &[usize]| random_tensor(rng, s, -1.0, 1.0);
    vec![
        (
            "conv",
            LayerKind::Conv {
                out_channels: 3,
                geometry: same3,
            },
            vec![x(rng, &[5, 4, 2])],
        ),
        (
            "conv_strided_valid",
            LayerKind::Conv {
                out_channels: 2,
                geometry: rect,
            },
            vec![x(rng, &[6, 7, 2])],
        ),
        (
            "depthwise",
            LayerKind::DepthwiseConv { geometry: s2 },
            vec![x(rng, &[5, 6, 3])],
        ),
        (
            "pointwise",
            LayerKind::PointwiseConv { out_channels: 4 },
            vec![x(rng, &[3, 4, 3])],
        ),
        ("dense", LayerKind::Dense { units: 5 }, vec![x(rng, &[7])]),
        (
            "batchnorm",
            LayerKind::BatchNorm { eps: 1e-3 },
            vec![x(rng, &[3, 3, 4])],
        ),
        (
            "relu",
            LayerKind::Activation(ActivationKind::Relu),
            vec![away_from(rng, &[4, 4, 2], -2.0, 2.0, &[0.0], 1e-2)],
        ),
        (
            "relu6",
            LayerKind::Activation(ActivationKind::Relu6),
            vec![away_from(rng, &[4, 4, 2], -3.0, 9.0, &[0.0, 6.0], 1e-2)],
        ),
        (
            "max_pool",
            LayerKind::Pool(PoolKind::Max(s2)),
            vec![distinct_tensor(rng, &[5, 5, 2], 1e-2)],
        ),
        (
            "avg_pool",
            LayerKind::Pool(PoolKind::Avg(same3)),
            vec![x(rng, &[5, 4, 2])],
        ),
        (
            "global_avg_pool",
            LayerKind::Pool(PoolKind::GlobalAvg),
            vec![x(rng, &[3, 4, 3])],
        ),
        ("softmax", LayerKind::Softmax, vec![x(rng, &[5])]),
        (
            "residual_add",
            LayerKind::ResidualAdd,
            vec![x(rng, &[3, 3, 2]), x(rng, &[3, 3, 2])],
        ),
        (
            "concat",
            LayerKind::Concat,
            vec![x(rng, &[3, 2, 2]), x(rng, &[3, 2, 3]), x(rng, &[3, 2, 1])],
        ),
    ]
}

/// Fused softmax + cross-entropy: `p − y` against finite differences of the
/// loss with respect to the logits.
pub fn check_fused(rng: &mut DetRng, classes: usize) -> f64 {
    let z = random_tensor(rng, &[classes], -2.0, 2.0);
    let label = rng.below(classes as u64) as usize;
    let y = ops::one_hot::<f64>(label, classes);
    let loss = |z: &Tensor<f64>| ops::cross_entropy(&ops::softmax(z).unwrap(), &y).unwrap();
    let g = ops::softmax_cross_entropy_backward(&ops::softmax(&z).unwrap(), &y).unwrap();
    let mut worst: f64 = 0.0;
    for e in 0..classes {
        let mut p = z.clone();
        p.data_mut()[e] += STEP;
        let up = loss(&p);
        p.data_mut()[e] -= 2.0 * STEP;
        let down = loss(&p);
        worst = worst.max(rel_err(g.data()[e], (up - down) / (2.0 * STEP)));
    }
    worst
}

/// Whole-model check on `samples` randomly chosen trainable coordinates.
/// Coordinates whose one-sided differences disagree (an activation kink
/// inside the probe interval) are redrawn.
pub fn check_model(
    model: &Model,
    params: &ParamStore<f64>,
    input: &Tensor<f64>,
    label: usize,
    samples: usize,
    rng: &mut DetRng,
) -> f64 {
    let classes = model.num_classes().unwrap();
    let y = ops::one_hot::<f64>(label, classes);
    let loss =
        |p: &ParamStore<f64>| ops::cross_entropy(&model.forward(p, input).unwrap(), &y).unwrap();
    let (l0, _, grads) = model.loss_and_grads(params, input, label).unwrap();
    let updatable: Vec<usize> = (0..params.len())
        .filter(|&i| params.is_updatable(i))
        .collect();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < samples {
        let pi = updatable[rng.below(updatable.len() as u64) as usize];
        let e = rng.below(params.entries()[pi].tensor.len() as u64) as usize;
        let analytic = grads.grads[pi].as_ref().map_or(0.0, |g| g.data()[e]);
        let mut probe = params.clone();
        let base = probe.entries()[pi].tensor.data()[e];
        probe.tensor_mut(pi).data_mut()[e] = base + STEP;
        let up = loss(&probe);
        probe.tensor_mut(pi).data_mut()[e] = base - STEP;
        let down = loss(&probe);
        let fwd = (up - l0) / STEP;
        let bwd = (l0 - down) / STEP;
        if (fwd - bwd).abs() > 1e-3 * fwd.abs().max(bwd.abs()).max(1e-3) {
            continue;
        }
        checked += 1;
        worst = worst.max(rel_err(analytic, (up - down) / (2.0 * STEP)));
    }
    worst
}
