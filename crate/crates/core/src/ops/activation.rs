use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Relu,
    /// `min(max(x, 0), 6)`, used inside the depthwise-separable blocks.
    Relu6,
}

impl ActivationKind {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        // comparisons keep NaN so divergence stays visible
        let r = if x < T::zero() { T::zero() } else { x };
        match self {
            ActivationKind::Relu => r,
            ActivationKind::Relu6 if r > T::of_f64(6.0) => T::of_f64(6.0),
            ActivationKind::Relu6 => r,
        }
    }

    #[inline]
    fn slope<T: Scalar>(self, x: T) -> T {
        let live = match self {
            ActivationKind::Relu => x > T::zero(),
            ActivationKind::Relu6 => x > T::zero() && x < T::of_f64(6.0),
        };
        if live {
            T::one()
        } else {
            T::zero()
        }
    }
}

pub fn activation<T: Scalar>(input: &Tensor<T>, kind: ActivationKind) -> Tensor<T> {
    input.map(|x| kind.apply(x))
}

pub fn activation_backward<T: Scalar>(
    input: &Tensor<T>,
    kind: ActivationKind,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    grad_out.expect_shape("activation grad_out", input.shape())?;
    let mut g = grad_out.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(input.data()) {
        *gv *= kind.slope(x);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let x = Tensor::<f64>::vector(&[-1.0, 0.0, 2.0]);
        assert_eq!(
            activation(&x, ActivationKind::Relu).data(),
            &[0.0, 0.0, 2.0]
        );
        let x = Tensor::<f64>::vector(&[7.0]);
        assert_eq!(activation(&x, ActivationKind::Relu6).data(), &[6.0]);
    }
}
