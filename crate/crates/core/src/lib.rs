//! Meshfree collocation for elliptic and parabolic problems with
//! polyharmonic-spline partition-of-unity methods.

pub mod assembly;
pub mod domain;
pub mod kernel;
pub mod linalg;
pub mod partition;
pub mod pde;
