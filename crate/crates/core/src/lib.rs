//! Exact nearest points and signed distances to convex polyhedra given in
//! H-representation, and signed-distance density maps for spectral images
//! segmented by linear classifiers.

pub mod bench;
pub mod classify;
pub mod density;
pub mod error;
pub mod geom;
pub mod io;
pub mod linalg;
pub mod lpfeas;
pub mod matrix;
pub mod minnorm;
pub mod qp_baseline;
pub mod rng;
pub mod unmix;

pub use error::{PolyxError, Result};
pub use geom::{Halfspace, Hyperplane, PolyhedronH};
pub use matrix::RowMatrix;
pub use minnorm::{MinNormResult, MinNormSolver, SolverConfig};
