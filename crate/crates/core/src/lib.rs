//! Reduced-order simulator of a driver arm model and an automated steering
//! controller acting on one steering wheel.
//!
//! The crate is organised bottom-up: [`sim`] holds the fixed-step clock,
//! delay lines and the sample log; [`vehicle`], [`reasoning`], [`arm`] and
//! [`steering`] are the physical and decision models; [`plant`] couples arms
//! and wheel; [`ident`] and [`metrics`] analyse results; [`scenario`] wires a
//! full closed-loop run and the condition sweep.

pub mod arm;
pub mod error;
pub mod ident;
pub mod metrics;
pub mod plant;
pub mod reasoning;
pub mod scenario;
pub mod sim;
pub mod steering;
pub mod vehicle;

pub use error::{Error, Result};
