//! Dense fp64 matrix algebra with reverse-mode differentiation, the Adagrad
//! optimizer, deterministic RNG streams and a binary checkpoint container.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use error::{NumericsError, Result};
pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::{AdagradConfig, AdagradState};
pub use params::{glorot, Bound, ParamId, ParamStore};
pub use rng::StreamRng;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor2;
