//! Dense f64 primitives with explicit backward passes, Adagrad, and a
//! central-difference gradient checker.

mod activation;
mod adagrad;
mod gradcheck;
mod matrix;

pub use activation::{log_sum_exp, relu, relu_backward, sigmoid, sigmoid_scalar};
pub use adagrad::{adagrad_step, adagrad_update, AdagradState};
pub use gradcheck::{finite_difference_check, relative_error, FdProbe, FdReport};
pub use matrix::{affine, affine_backward, AffineGrads, Matrix};
