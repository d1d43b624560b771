//! Numerical toolkit for standard static spacetimes `ℝ × S` with metric
//! `-β dt² + g_S`.

pub mod catalog;
pub mod cli;
pub mod connect;
pub mod diagnostics;
mod error;
pub mod io;
pub mod manifold;
pub mod ode;
pub mod optim;
pub mod spacetime;

pub use error::{Error, Result};
