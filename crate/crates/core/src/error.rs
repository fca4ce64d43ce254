use alloc::string::String;

use crate::elements::ElementKind;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mesh integrity: {0}")]
    MeshIntegrity(String),
    #[error("degenerate tetrahedron {tet}: volume {volume:e}")]
    DegenerateGeometry { tet: usize, volume: f64 },
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("{kind:?} degrees of freedom are not unisolvent (condition estimate {condition:e})")]
    Unisolvence { kind: ElementKind, condition: f64 },
    #[error("integrity: {0}")]
    Integrity(String),
}

pub type Result<T> = core::result::Result<T, FemError>;
