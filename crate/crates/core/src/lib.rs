//! First-passage times of random-walk bridges over moving boundaries.

pub mod asymptotics;
pub mod boundaries;
pub mod cascade;
pub mod density_kernel;
pub mod error;
pub mod estimators;
pub mod increments;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;
pub mod walk_sim;

pub use boundaries::{BoundaryFamily, BoundarySequence};
pub use cascade::CascadeConfig;
pub use density_kernel::{ConvolutionMethod, GridConfig, KilledDensityGrid};
pub use error::{Error, Result};
pub use estimators::{EstimateRecord, KRule, Method};
pub use increments::IncrementModel;
