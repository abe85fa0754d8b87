//! Point processes ordered by clustering strength and percolation of their
//! Boolean models.
//!
//! The crate is organised bottom-up:
//!
//! * [`geom`] and [`rng`]: points, windows, patterns, fixed-radius neighbour
//!   search and deterministic splittable randomness.
//! * [`generators`]: Poisson, lattices, perturbed lattices, annular
//!   Poisson-Poisson cluster processes and count-vector models.
//! * [`percolation`]: Gilbert graphs, components, spanning probabilities,
//!   critical-radius estimation and k-coverage.
//! * [`discrete`]: close-packed lattice approximations, contours and open
//!   path counting.
//! * [`shotnoise`]: shot-noise fields, SINR graphs and Chernoff level bounds.
//! * [`stats`]: clustering descriptors and stochastic-order checks.
//! * [`bounds`]: closed-form critical-radius bounds.

pub mod bounds;
pub mod discrete;
pub mod error;
pub mod generators;
pub mod geom;
pub mod mc;
pub mod percolation;
pub mod quad;
pub mod rng;
pub mod shotnoise;
pub mod stats;

pub use error::{Error, Result};
pub use geom::{distance, fmt17, CellGrid, Point, PointPattern, Window};
pub use rng::RngStream;
