//! Numerical laboratory for Scott-Zhang determining projections of the
//! incompressible Navier-Stokes equations.

pub mod config;
pub mod determining;
pub mod error;
pub mod forms;
pub mod gronwall;
pub mod mesh;
pub mod nse2d;
pub mod pipeline;
pub mod quadrature;
pub mod spectral;
pub mod study;
pub mod szinterp;

pub use error::{Error, Result};
