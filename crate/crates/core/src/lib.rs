//! Adaptive dynamics for trait- and age-structured populations.

pub mod canonical;
pub mod demography;
pub mod error;
pub mod fitness;
pub mod ibm;
pub mod model;
pub mod models;
pub mod output;
pub mod plot;
pub mod quadrature;
pub mod roots;
pub mod runner;
pub mod special;
pub mod stability;
pub mod stats;
pub mod tss;
pub mod verify;

pub use error::{Error, Result};
pub use model::{ModelSpec, TraitValue};
