//! Observer-based event-triggered backstepping boundary control of a 1-D
//! reaction-diffusion PDE with Robin actuation.
//!
//! The crate covers the full pipeline:
//!
//! * closed-form backstepping gain kernels and observer/controller gains
//!   ([`kernels`]),
//! * the certificate constants behind the trigger design: Lyapunov
//!   feasibility, the minimal dwell-time, and the open-loop stability
//!   threshold ([`analysis`]),
//! * an implicit-Euler finite-difference solver for plant and observer
//!   ([`solver`]),
//! * the dynamic event-triggering mechanism with its runtime invariant
//!   checks ([`trigger`]),
//! * an experiment harness: single runs, 100-initial-condition sweeps, CSV
//!   and JSON export ([`sim`], [`config`], [`report`]).

pub mod analysis;
pub mod bessel;
pub mod config;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod params;
pub mod quad;
pub mod report;
pub mod sim;
pub mod solver;
pub mod trigger;

pub use error::{Error, Result};
pub use grid::{init_profile, l2_norm, Grid, InitialCondition, ProfileLabel, StateProfile};
pub use params::SystemParams;
