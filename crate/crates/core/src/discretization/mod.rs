//! Domains, boundary-graded meshes and assembly of the quotient's integrals.

mod assembly;
mod domain;
mod mesh;

use thiserror::Error;

pub use assembly::{assemble, assemble_with, AssembleOptions, AssembledForms, Matrices, Terms};
pub use domain::{make_domain, sphere_area, Domain};
pub use mesh::{make_graded_mesh, make_graded_mesh_with_ratio, GridFunction, Mesh};

use crate::hardy::HardyError;
use crate::quadrature::QuadratureError;

#[derive(Debug, Error)]
pub enum DiscretizationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid function has {got} values, mesh has {expected} nodes")]
    MeshMismatch { expected: usize, got: usize },
    #[error("quadrature point at delta = {delta:e} lies below the profile grid (smallest node {profile_min:e})")]
    ExtrapolationRequired { delta: f64, profile_min: f64 },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(#[from] QuadratureError),
    #[error("pinned nodes split the free nodes into several blocks")]
    NonContiguousFreeNodes,
    #[error(transparent)]
    Hardy(#[from] HardyError),
}
