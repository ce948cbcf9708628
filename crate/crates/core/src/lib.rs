//! Finite-element toolkit for locating an inclusion in a stationary bioheat tissue model.

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod sensitivity;
pub mod shapeopt;

pub use error::{Error, Result};
pub use fem::{BoundaryProfile, ComplexNodalField, NodalField, PhysicalCoefficients};
pub use geometry::Point;
pub use mesh::{BoundaryTag, DeformationField, ElementGeometry, Mesh, MeshId, Region};
