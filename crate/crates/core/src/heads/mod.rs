//! Inference layers: local softmax, linear-chain CRF and label attention.

pub mod crf;
pub mod lan;
pub mod softmax;

pub use crf::CrfHead;
pub use lan::{LabelEmbeddingTable, LanLayerParams};
pub use softmax::SoftmaxHead;
