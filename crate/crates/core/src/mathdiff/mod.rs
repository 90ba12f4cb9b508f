//! Linear algebra, rotations, direction sampling and reverse-mode
//! differentiation.

mod complex;
mod fibonacci;
mod linalg;
mod real;
mod rotation;
mod tape;

pub use complex::{CVec3, Complex};
pub use fibonacci::fibonacci_directions;
pub use linalg::{Mat3, Vec3};
pub use real::Real;
pub use rotation::{boresight, rotation_from_ypr};
pub use tape::{grad, DiffScalar, Gradients, Op, Tape};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
