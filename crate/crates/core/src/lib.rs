//! Simulation, training, adversarial attacks and robustness bounds for
//! binary quantum classifiers.

pub mod attacks;
pub mod bounds;
pub mod circuit;
pub mod data;
pub mod error;
pub mod models;
pub mod simulator;
pub mod textfmt;
pub mod training;

pub use error::{Error, Result};
pub use models::{CircuitSpec, ClassifierModel, QcnnSize};
pub use simulator::{StateVector, C64};
