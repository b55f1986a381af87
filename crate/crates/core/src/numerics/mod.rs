//! Dense linear algebra, seeded randomness, Adam and gradient checking.

mod adam;
mod gradcheck;
mod matrix;
mod rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, BlockReport, GradCheckReport, REL_ERROR_FLOOR};
pub use matrix::{axpy, dot, log_sigmoid, matvec, matvec_t_acc, norm_sq, outer_acc, sigmoid, Matrix};
pub use rng::RngStream;
