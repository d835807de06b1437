//! Numerical toolkit for the filiform Carnot groups `G_{n+1}`: group law,
//! invariant frames, homogeneous norms and their sub-Riemannian derivatives,
//! Boltzmann-type measures built from those norms, and the Monte Carlo and
//! optimisation machinery used to probe coercive inequalities for them.

pub mod audit;
pub mod error;
pub mod bounds;
pub mod calculus;
pub mod frames;
pub mod geodesics;
pub mod group;
pub mod lab;
pub mod measures;
pub mod norms;
pub mod seed;
pub mod stats;

pub use error::{CarnotError, Result};
pub use group::{compose, dilate, inverse, GroupDescriptor, GroupPoint};
