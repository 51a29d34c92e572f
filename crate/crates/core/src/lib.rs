//! Beta, beta-prime and Gaussian-Delaunay tessellations built from Poisson
//! processes of weighted points via the paraboloid lifting, with the
//! closed forms and Monte Carlo estimators used to check them.

pub mod error;
pub mod rng;
pub mod special;
pub mod stats;
pub mod point_processes;

pub use error::{Error, Result};
pub mod predicates;
pub mod hull;
pub mod bounds;
pub mod tessellation;
pub mod typical;
pub mod convergence;
pub mod io;
pub mod oracles;
