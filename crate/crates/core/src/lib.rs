//! Cell-free massive MIMO over Poisson-deployed access points: Monte Carlo
//! simulation, closed-form coverage and rate bounds, and a small-cell baseline.

pub mod channel;
pub mod closed_form;
pub mod config;
pub mod downlink;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod seed;

pub use config::{MonteCarlo, PilotPolicy, SystemConfig};
pub use error::{Error, Result};
