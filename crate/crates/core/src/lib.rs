//! Momentum-based access control and Δv-bounded speed advisory for mixed
//! traffic, with a small microscopic simulator to evaluate both.

pub mod access_control;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod microsim;
pub mod risk_model;
pub mod speed_advisory;

pub use error::{Error, Result};
