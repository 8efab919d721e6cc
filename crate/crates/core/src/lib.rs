//! Monte Carlo and exact tools for Gaussian approximation of normalized sums
//! of random vectors over lower-orthant rectangles.

pub mod bounds;
pub mod distributions;
pub mod estimators;
pub mod grid;
pub mod harness;
pub mod matrix;
pub mod normal;
pub mod oracle;
pub mod rng;
pub mod scalar;

pub use scalar::Real;

pub type Covariance = matrix::CovarianceSpec<f64>;
