//! Linearization, Riccati synthesis, LQR and the gain-scheduled LQR.

mod care;
mod linearize;
mod lqr;
mod schedule;

pub use care::{care_residual, solve_care, spectral_abscissa};
pub use linearize::{jacobians, linearize, LinearModel};
pub use lqr::{lqr_control, lqr_gain, Gain, LqrLaw, LqrWeights};
pub use schedule::{build_schedule, gs_control, GainSchedule, Interpolant, ScheduleNode, ScheduledLaw, TrimOffsets};
