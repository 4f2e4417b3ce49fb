//! Dense `f64` matrices, a reverse-mode gradient tape, stable softmax
//! variants and an incremental Cholesky log-determinant.

mod cholesky;
mod gradcheck;
mod ops;
mod softmax;
mod tape;
mod tensor;

pub use cholesky::{logdet_extend, CholeskyState, DEFAULT_JITTER};
pub use gradcheck::grad_check;
pub use ops::{sigmoid, Backend, Eager};
pub use softmax::{masked_log_softmax, masked_softmax, masked_softmax_logits, softmax, softmax_logits};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{dot, Tensor};

pub(crate) use ops::log_sum_exp;
