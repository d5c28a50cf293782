use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-parameter squared-gradient accumulator plus the step settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdagradState {
    pub accumulator: Vec<f64>,
    pub learning_rate: f64,
    pub epsilon: f64,
}

impl AdagradState {
    pub fn new(len: usize, learning_rate: f64, epsilon: f64) -> Self {
        AdagradState {
            accumulator: vec![0.0; len],
            learning_rate,
            epsilon,
        }
    }
}

/// In-place update over raw slices: `acc += g²; p -= lr·g/(√acc + ε)`.
#[inline]
pub fn adagrad_update(param: &mut [f64], grad: &[f64], acc: &mut [f64], lr: f64, eps: f64) {
    for ((p, &g), a) in param.iter_mut().zip(grad).zip(acc.iter_mut()) {
        if g == 0.0 {
            continue;
        }
        *a += g * g;
        *p -= lr * g / (libm::sqrt(*a) + eps);
    }
}

pub fn adagrad_step(param: &mut [f64], grad: &[f64], state: &mut AdagradState) -> Result<()> {
    if param.len() != grad.len() || param.len() != state.accumulator.len() {
        return Err(Error::dim(
            "adagrad_step",
            (param.len(), 1),
            (grad.len(), state.accumulator.len()),
        ));
    }
    adagrad_update(
        param,
        grad,
        &mut state.accumulator,
        state.learning_rate,
        state.epsilon,
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = [1.5];
        let mut s = AdagradState::new(1, 0.1, 1e-8);
        adagrad_step(&mut p, &[0.0], &mut s).unwrap();
        assert_eq!(p, [1.5]);
        assert_eq!(s.accumulator, [0.0]);
    }

    #[test]
    fn first_and_second_steps() {
        let mut p = [1.0];
        let mut s = AdagradState::new(1, 0.1, 1e-8);
        adagrad_step(&mut p, &[1.0], &mut s).unwrap();
        // 1 - 0.1 * 1 / (1 + 1e-8)
        assert!((p[0] - 0.9).abs() < 1e-8);
        assert_eq!(s.accumulator, [1.0]);
        let before = p[0];
        adagrad_step(&mut p, &[1.0], &mut s).unwrap();
        let step = before - p[0];
        assert!((step - 0.1 / 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdagradState::new(2, 0.1, 1e-8);
        assert!(adagrad_step(&mut [0.0], &[1.0], &mut s).is_err());
    }

    proptest! {
        #[test]
        fn step_size_nonincreasing_and_accumulator_monotone(g in -5.0f64..5.0, steps in 2usize..20) {
            prop_assume!(g.abs() > 1e-6);
            let mut p = [0.0];
            let mut s = AdagradState::new(1, 0.05, 1e-8);
            let mut last_step = f64::INFINITY;
            let mut last_acc = 0.0;
            for _ in 0..steps {
                let before = p[0];
                adagrad_step(&mut p, &[g], &mut s).unwrap();
                let step = (before - p[0]).abs();
                prop_assert!(step <= last_step + 1e-15);
                prop_assert!(s.accumulator[0] >= last_acc);
                last_step = step;
                last_acc = s.accumulator[0];
            }
        }
    }
}
