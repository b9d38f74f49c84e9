//! Partial exclusion in a random environment of maximal occupancies, its
//! dual random walk, and numerical checks of the homogenized limit.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod environment;
pub mod error;
pub mod exclusion;
pub mod harness;
pub mod homogenization;
pub mod hydrodynamics;
pub mod lattice;
pub mod parallel;
pub mod report;
pub mod rng;
pub mod semigroup;
pub mod stats;
pub mod walk;

pub use environment::{conductances, ergodic_average, translate, ConductanceField, EnvLaw, Environment, LawKind};
pub use error::{Result, SepError};
pub use lattice::Torus;
pub use walk::{simulate_walk, time_change, GeneratorMatrix, Trajectory, WalkKind};
