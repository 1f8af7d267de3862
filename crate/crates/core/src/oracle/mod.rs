//! Independent reference computations: a radially symmetric solver, profile
//! comparison against the full-grid solver, and manufactured-solution
//! convergence studies.

pub mod compare;
pub mod mms;
pub mod radial;

pub use compare::{
    compare_profiles, compare_to_oracle, read_profile, spherical_average, write_profile, OracleReport, DEFAULT_TOL,
};
pub use mms::{mms_convergence, MmsComponent, MmsPlan, MmsResult};
pub use radial::{radial_reference, RadialConfig, RadialProfile, RadialSolver};
