//! Global, local and generalized local Minkowski tensors of polytopes and
//! smooth bodies, together with identity checks and the paraboloid lifting
//! experiment.

pub mod error;
pub mod experiments;
pub mod linalg;
pub mod geometry;
pub mod identities;
pub mod smoothbody;
pub mod sphereint;
pub mod symtensor;
pub mod valuations;

pub use error::{Error, Result};
