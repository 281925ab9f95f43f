//! Quasi-static model of a fiber-jamming follow-the-leader (FTL) continuum robot.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: robot configuration, joint model, channel-length law and
//!   forward kinematics of the segmented chain.
//! - [`environment`]: reference trajectories, checkpoint rings and run phases.
//! - [`statics`]: energy of the joint chain under joint springs and ring contact,
//!   and the bounded equilibrium solver.
//! - [`ftl`]: the jam/unjam/propagate cycle, conserved path, steering law and
//!   the tendon-only baseline.
//! - [`metrics`]: sweeping-area FTL error on occupancy grids and force summaries.

pub mod environment;
pub mod error;
pub mod ftl;
pub mod geometry;
pub mod metrics;
pub mod statics;

pub use error::{Error, Result};
