//! Localization of a small electromagnetic inclusion with the
//! topological-derivative imaging functional.
//!
//! Boundary data are synthesized from the leading-order small-inclusion
//! expansion, back-propagated with the free-space dyadic Green's function and
//! turned into imaging maps. The `stability` module checks the measurement and
//! medium noise statistics of those maps against closed-form predictions.

pub mod cli;
pub mod error;
pub mod forward;
pub mod greens;
pub mod imaging;
pub mod math;
pub mod scenario;
pub mod scene;
pub mod stability;

pub use error::{Error, Result};
pub use math::{ComplexMat3, Mat3, Vec3, Vec3C, C64};
