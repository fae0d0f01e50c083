//! Sequence labeling with BiLSTM-softmax, BiLSTM-CRF and label attention
//! network (LAN) inference layers, built on a small reverse-mode autodiff
//! tape over 64-bit dense tensors.

pub mod bench;
pub mod corpus;
pub mod error;
pub mod export;
pub mod gradcheck;
pub mod heads;
pub mod kernels;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod serialize;
pub mod spans;
pub mod tape;
pub mod tensor;
pub mod train;

pub use corpus::{EncodedSentence, RawSentence, SyntheticSpec, Vocabs};
pub use error::{Error, LoadError, Result};
pub use metrics::Prf;
pub use model::{Arch, ForwardOutput, Model, ModelConfig};
pub use rng::Rng;
pub use tape::{Tape, Var};
pub use tensor::{Param, ParamId, ParamStore, Tensor};
pub use train::{Metric, TrainConfig, TrainReport};
