//! Waiting times, recurrence and local dimension estimates for measure
//! preserving maps.
//!
//! The crate simulates orbits of a few reference systems in exact
//! fixed-point arithmetic, measures first-entrance times into shrinking
//! balls, and turns them into estimates of the recurrence indicators
//! `R(x, y)` and the local dimensions `d(y)` of the invariant measure.

pub mod error;
pub mod estimators;
pub mod exec;
pub mod harness;
pub mod hitting;
pub mod numerics;
pub mod orbit;
pub mod systems;

pub use error::{Error, Result};
pub use exec::Exec;
pub use hitting::{HitMode, HittingProfile, RadiusSchedule};
pub use numerics::{ContinuedFraction, Fixed};
pub use orbit::{GridIndex, OrbitBuffer};
pub use systems::{Metric, Point, Space, SystemSpec};
