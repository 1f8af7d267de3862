//! Diffuse-interface simulator for a three-phase tumor growth model.
//!
//! Proliferating, quiescent and dead cell densities are transported by a
//! Brinkman velocity field whose divergence is fixed by net proliferation.
//! Nutrient and drug diffuse and are consumed inside the tumor. The moving
//! tumor is a level set advected by a prescribed interface velocity inside a
//! fixed box; impermeability of the interface is imposed by a `1/ε` normal
//! penalty, and viscosity/diffusivity are cut down by a factor `ω` in healthy
//! tissue.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cells;
pub mod chem;
pub mod cli;
pub mod domain;
pub mod error;
pub mod flow;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod sim;

pub use error::{Error, Result};
pub use grid::{Grid, ScalarField, VectorField};
