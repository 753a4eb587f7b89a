//! Nonlinear F-16 longitudinal plant.
//!
//! States are `(theta, V, alpha, q)` and inputs `(T, delta_e)`. Angles are
//! radians everywhere inside the library; file formats and the command line
//! speak degrees and convert at the boundary.

mod closed_loop;
mod dynamics;
mod params;
mod state;
mod tables;

pub use closed_loop::{ClosedLoop, ControlLaw, Disturbance, NoDisturbance, SineDisturbance};
pub use dynamics::{dynamic_pressure, dynamics, saturate, Plant, ELEVATOR_LIMIT_DEG, THRUST_MAX, THRUST_MIN};
pub use params::AircraftParams;
pub use state::{ControlInput, LongitudinalState};
pub use tables::{AeroTableFile, AeroTables, Coefficient};
