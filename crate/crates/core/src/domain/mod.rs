//! Reference box, level-set tracking of the tumor and the prescribed
//! interface velocity.

pub mod levelset;
pub mod shape;
pub mod velocity;

pub use levelset::{
    advect_levelset, delta, heaviside, init_levelset, interface_normal, reinitialize, smoothed_indicator,
    surface_weight, AdvectionScheme, LevelSetField, NormalField,
};
pub use shape::Shape;
pub use velocity::{BoundaryVelocity, VelocityPreset};
