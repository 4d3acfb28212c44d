//! Monte Carlo physics-informed neural networks for space- and
//! time-fractional PDEs on the unit ball.

mod act;
pub mod abc;
pub mod autodiff;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod fmt;
pub mod net;
pub mod oracle;
pub mod problems;
pub mod quadrature;
pub mod rng;
pub mod sampling;
pub mod spectral;
pub mod train;
pub mod special;

pub use error::{Error, Result};
