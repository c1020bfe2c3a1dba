//! Hybrid coordinated path following for fixed-wing UAVs with speed and
//! turn-rate limits.
//!
//! The crate is organised bottom-up:
//!
//! * [`paths`] holds the planar reference curves and projection queries.
//! * [`error_frame`] turns a pose into path-following errors and classifies
//!   them into the regions the controller dispatches on.
//! * [`params`] designs the coordination set.
//! * [`control`] implements every control law and the supervisor.
//! * [`coordination`] tracks pre-neighbors and arc distances.
//! * [`sim`] runs closed-loop scenarios and the escape-set demonstration.
//! * [`verify`] contains randomized property suites.
//! * [`config`] reads scenario files.

pub mod config;
pub mod control;
pub mod coordination;
pub mod error;
pub mod error_frame;
pub mod parallel;
pub mod params;
pub mod paths;
pub mod sim;
pub mod verify;

pub use control::{hybrid_supervisor, ChiFunction, ControlCommand};
pub use error::{Error, Result};
pub use error_frame::{classify, compute_error, PathError, Region};
pub use parallel::Exec;
pub use params::{design_coordination_set, CoordParams, Limits};
pub use paths::{Direction, Path};
