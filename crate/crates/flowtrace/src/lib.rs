//! Testbed for tracking information flow in 2D advection-diffusion data.
//!
//! The crate has two halves. The simulation half builds velocity fields on a
//! periodic grid, integrates the advection-diffusion equation with a
//! first-order upwind scheme, and emits benchmark time-series datasets for a
//! catalog of flow scenarios. The discovery half recovers the information-flow
//! structure from those datasets: a lagged-variable table feeds a temporal
//! PC-stable skeleton search with Gaussian (Fisher-Z) conditional-independence
//! tests, and the resulting graph is collapsed into per-location summary edges
//! and flow-velocity estimates that can be compared against the true field.

pub mod ci;
pub mod dataset;
pub mod discovery;
pub mod error;
pub mod grid;
pub mod message;
pub mod render;
pub mod scenario;
pub mod sim;
pub mod summary;
pub mod velocity;

pub use error::{Error, Result};
pub use grid::{GridSpec, PointIndex};
