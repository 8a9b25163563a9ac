pub mod analysis;
pub mod arrivals;
pub mod config;
pub mod delay;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod fluid;
pub mod mg1;
pub mod network;
pub mod region;
pub mod report;
pub mod rng;
pub mod sim;
pub mod zeta;

pub use error::{Error, Result};
