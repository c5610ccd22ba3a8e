//! Hybrid quantum-classical adversarial augmentation for imbalanced
//! tabular data.
//!
//! Numeric modules are generic over [`Real`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix the scalar to `f64`, which is what the
//! command-line runner uses.

pub mod baselines;
pub mod cli;
pub mod downstream;
pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod neural;
pub mod preprocess;
pub mod qgan_train;
pub mod quantum_sim;
pub mod scalar;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Real;

pub type Matrix64 = matrix::Matrix<f64>;
pub type Statevector64 = quantum_sim::Statevector<f64>;
pub type CircuitSpec64 = quantum_sim::CircuitSpec<f64>;
pub type AngleMatrix64 = quantum_sim::AngleMatrix<f64>;
pub type PreprocessModel64 = preprocess::PreprocessModel<f64>;
pub type LabeledTable64 = preprocess::LabeledTable<f64>;
pub type QuantumGenerator64 = qgan_train::QuantumGenerator<f64>;
pub type ClassicalGenerator64 = baselines::ClassicalGenerator<f64>;
pub type DiscriminatorParams64 = neural::DiscriminatorParams<f64>;
