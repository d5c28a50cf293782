use crate::{Error, Result};

use super::Matrix;

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Gradient through ReLU given the pre-activation `x`. The kink at zero takes
/// the zero subgradient.
pub fn relu_backward(x: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    if x.shape() != grad_out.shape() {
        return Err(Error::dim("relu_backward", x.shape(), grad_out.shape()));
    }
    let mut g = grad_out.clone();
    for (gv, &xv) in g.as_mut_slice().iter_mut().zip(x.as_slice()) {
        if xv <= 0.0 {
            *gv = 0.0;
        }
    }
    Ok(g)
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(sigmoid_scalar)
}

/// `ln Σ exp(v_k)` with a max shift.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    let max = v
        .iter()
        .copied()
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))
        .ok_or_else(|| Error::Usage("log_sum_exp of an empty vector".into()))?;
    let sum: f64 = v.iter().map(|&x| libm::exp(x - max)).sum();
    Ok(max + libm::log(sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relu_values() {
        let x = Matrix::from_rows(&[[-2.0, 3.0, 0.0]]).unwrap();
        assert_eq!(relu(&x).as_slice(), &[0.0, 3.0, 0.0]);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        let low = sigmoid_scalar(-1000.0);
        assert!(low >= 0.0 && low.is_finite());
        assert!(sigmoid_scalar(-700.0) > 0.0);
        assert_eq!(sigmoid_scalar(1000.0), 1.0);
        assert!((sigmoid_scalar(2.0) + sigmoid_scalar(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lse_examples() {
        let direct = (1.0f64.exp() + 1.0f64.exp()).ln() - 1.0;
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - direct).abs() < 1e-15);
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - 0.693147).abs() < 1e-6);
        for c in [-3.5, 0.0, 17.0, 1e5] {
            assert_eq!(log_sum_exp(&[c]).unwrap(), c);
        }
        let big = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!((big - (1000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn lse_empty_is_usage_error() {
        assert!(matches!(log_sum_exp(&[]), Err(Error::Usage(_))));
    }

    proptest! {
        #[test]
        fn lse_shift_invariance(v in proptest::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0) {
            let shifted: alloc::vec::Vec<f64> = v.iter().map(|x| x + c).collect();
            let lhs = log_sum_exp(&shifted).unwrap();
            let rhs = log_sum_exp(&v).unwrap() + c;
            prop_assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }
}
