//! The feature-image classifier: a two-conv, two-fc network trained with
//! plain mini-batch SGD.
//!
//! Layers are implemented directly (im2col plus a gemm kernel), generic over
//! f32 for training and f64 for gradient checks.

pub mod arch;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod model;
pub mod scalar;
pub mod train;

pub use arch::{expected_param_count, Arch, Layer};
pub use error::{Error, Result};
pub use io::{load_model, save_model};
pub use model::{is_face, CnnModel, Model, Params};
pub use train::{fit, train, Dataset, EarlyStopping, Learner, TrainConfig, TrainOutcome};
