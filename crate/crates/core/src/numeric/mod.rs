//! Dense `f64` tensors, reverse-mode differentiation, LSTM cells, RMSprop and
//! finite-difference gradient checking.

pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use lstm::{bilstm_encode, lstm_encode, lstm_step, BiStates, LstmParams};
pub use optim::{RmsProp, RmsPropConfig};
pub use tape::{logistic, softmax, Gradients, ParamId, ParamSet, Tape, Var};
pub use tensor::Tensor;
