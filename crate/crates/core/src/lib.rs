//! Numerical workbench for torsion functions, bottoms of spectra, Green
//! functions, relative capacity, capacitary width, Dirichlet heat semigroups and
//! harmonic measure on planar and hyperbolic domains.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capwidth;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod heat;
mod linalg;
pub mod mesh;
pub mod montecarlo;
pub mod spectrum;
pub mod verify;

pub use config::{corpus, RunConfig};
pub use error::{Error, Result};
pub use geometry::{ModelSurface, Point, SurfaceKind};
pub use mesh::{build_system, DomainSpec, DomainSystem, Window};
