//! Core of a low-order nonconforming discrete de Rham complex on tetrahedra.
//!
//! The crate is `no_std` and only needs an allocator. It owns everything that is
//! pure arithmetic on a mesh: the structured cube mesh, quadrature, the six local
//! elements, interpolation and operator matrices, bilinear forms and loads,
//! the manufactured solutions and the error functionals. Linear solvers, file
//! formats and the command line live in the `ncfem` companion crate.
//!
//! The complex is
//!
//! ```text
//! 0 -> W_h --grad--> Phi_h --curl--> V_h^div --div--> Q_h -> 0
//! ```
//!
//! where `W_h` is a quadratic-plus-bubble nonconforming element and `Phi_h` is
//! the linear vector field space enriched by gradients of cubic bubbles.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assembly;
pub mod elements;
pub mod error;
pub mod errors;
pub mod interp;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod sparse;

pub use error::FemError;

/// Points and vectors in physical space.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Global function spaces of the discrete complex, plus the two classical
/// conforming spaces used by the decoupled method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpaceTag {
    /// Continuous quadratic Lagrange space `V_h^grad`.
    Grad,
    /// Second-kind lowest order Nedelec space `V_h^ND`.
    Nd,
    /// Nonconforming enriched vector space `Phi_h`.
    Phi,
    /// Nonconforming scalar space `W_h`.
    W,
    /// Lowest order Raviart-Thomas space `V_h^div`.
    Div,
    /// Piecewise constants `Q_h`.
    Q,
}

impl SpaceTag {
    pub const ALL: [SpaceTag; 6] = [
        SpaceTag::Grad,
        SpaceTag::Nd,
        SpaceTag::Phi,
        SpaceTag::W,
        SpaceTag::Div,
        SpaceTag::Q,
    ];

    pub fn element(self) -> elements::ElementKind {
        use elements::ElementKind as K;
        match self {
            SpaceTag::Grad => K::LagrangeP2,
            SpaceTag::Nd => K::Nedelec2,
            SpaceTag::Phi => K::PhiNc,
            SpaceTag::W => K::WNc,
            SpaceTag::Div => K::Rt0,
            SpaceTag::Q => K::P0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpaceTag::Grad => "grad",
            SpaceTag::Nd => "nd",
            SpaceTag::Phi => "phi",
            SpaceTag::W => "w",
            SpaceTag::Div => "div",
            SpaceTag::Q => "q",
        }
    }
}
