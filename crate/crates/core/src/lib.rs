//! Simulation toolkit for the far vertices of Poisson–Voronoi cells: exact
//! tail constants, certified typical cells, Monte Carlo estimators and box
//! experiments for the maximal nucleus-to-vertex distance.

mod clip;
pub mod constants;
pub mod error;
pub mod estimators;
pub mod extremes;
pub mod geometry;
mod linalg;
pub mod parallel;
pub mod sampling;
pub mod stats;
pub mod typical_cell;
pub mod validation;

pub use constants::Dim;
pub use error::{Error, Result};
pub use sampling::{IntensityModel, RngStream};
pub use stats::{MCEstimate, RunningStats};
