//! Numerical laboratory for two classical planar shape functionals: the
//! torsional rigidity `T` and the first Dirichlet eigenvalue `lambda_1`.
//!
//! The crate solves the torsion and eigenvalue problems with P1/P2 finite
//! elements on deterministic fan meshes, converts the results into boundary
//! integrals (Pohozaev forms, Hadamard shape derivatives along affine flows),
//! and runs support-function simulations of curve shortening, inverse mean
//! curvature, and a torsion-driven normal flow on strictly convex bodies.
//!
//! Module map:
//! - [`geometry`]: polygons, affine deformation families, theorem triangle
//!   configurations, critical times.
//! - [`mesh`]: centroid-fan triangulation with uniform refinement and
//!   side-tagged boundary edges.
//! - [`fem`]: torsion and principal-eigenpair solves, boundary gradient
//!   traces.
//! - [`functionals`]: T, lambda_1, their normalizations, Pohozaev boundary
//!   forms, per-side flux averages.
//! - [`flows`]: shape derivatives, proof-expression cross checks,
//!   monotonicity scans, and the rectangle symmetrization pipeline.
//! - [`curvature`]: support bodies, spectral differentiation, curvature
//!   flows, deficit and curvature-weighted boundary functionals.

pub mod curvature;
pub mod error;
pub mod fem;
pub mod flows;
pub mod functionals;
pub mod geometry;
pub mod mesh;
pub mod sparse;

pub use error::{Error, Result};
pub use geometry::{AffineFlow, Polygon, SideTag, TriangleConfig, Vec2};

/// Library version string.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
