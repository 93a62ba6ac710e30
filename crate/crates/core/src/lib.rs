//! Hierarchical graph transformer for brain connectome classification.
//!
//! Subjects enter as ROI time series. [`graph`] turns them into sparse
//! functional graphs and hop-distance matrices, [`lsra`] encodes nodes with
//! distance-decayed and global attention heads, [`clustering`] pools nodes
//! into prior-guided communities and classifies them, and [`train`] runs the
//! experiment protocol. Numerics are generic over [`Scalar`] (`f32`/`f64`);
//! the `*64` aliases below fix the usual choice.

pub mod autodiff;
pub mod clustering;
pub mod cohort;
pub mod entmax;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod io;
pub mod lsra;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{BrainHgt, ModelConfig, Variant};
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor64 = Tensor<f64>;
pub type BrainHgt64 = BrainHgt<f64>;
pub type DicePrior64 = clustering::DicePrior<f64>;
pub type CorrelationMatrix64 = graph::CorrelationMatrix<f64>;
pub type SparseBrainGraph64 = graph::SparseBrainGraph<f64>;
