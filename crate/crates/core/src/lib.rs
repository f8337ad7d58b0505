pub mod cli;
pub mod concentration;
pub mod error;
pub mod feasibility;
pub mod geometry;
pub mod linsup;
pub mod projder;
pub mod randgen;
pub mod stats;
pub mod supermatrix;
pub use error::{Error, Result};
pub use geometry::Vector;
