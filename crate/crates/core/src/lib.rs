//! Trajectory planning for a multirotor UAV relaying data from another UAV to
//! a ground base station.
//!
//! Multirotors tilt to accelerate, and a body-mounted dipole tilts with them,
//! so the link gains of a moving relay depend on its attitude as well as its
//! position. This crate optimizes the relay path over quintic motion
//! primitives with a smooth-max surrogate of the end-to-end rate, and
//! evaluates trajectories under the exact dipole pattern.
//!
//! Modules:
//! - [`geometry`]: vectors, rotations, attitude from acceleration.
//! - [`dynamics`]: min-jerk quintic segments, trajectories, feasibility audit.
//! - [`comms`]: dipole gains, the quadratic gain surrogate, hop SNRs.
//! - [`objective`]: smooth max, per-step cost, exact throughput.
//! - [`optimizer`]: direct transcription and the penalty/L-BFGS solver.
//! - [`scenario`]: configuration files, trajectory CSV, synthetic peers.

pub mod comms;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod objective;
pub mod optimizer;
pub mod scenario;

pub use comms::{GainModel, LinkBudget, LinkSample};
pub use dynamics::{AxisState, FeasibilityReport, QuinticSegment, Trajectory, TrajectoryKnot};
pub use error::{Error, Result};
pub use geometry::{Attitude, RotationMatrix, Vec3};
pub use objective::{CostParams, LinkSetup, Throughput};
pub use optimizer::{InitStrategy, SolveReport, SolverParams};
pub use scenario::{PeerSpec, Scenario};
