pub mod cones;
pub mod curvature;
pub mod error;
pub mod lambda2;
pub mod ode;
pub mod rng;
pub mod torus;

pub use error::{Error, Result};
