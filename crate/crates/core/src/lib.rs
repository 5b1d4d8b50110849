//! Credit value adjustment of vulnerable European calls under SABR,
//! Hull-White and Heston stochastic volatility with Vasicek or CIR default
//! intensities: correlation-expansion formulas and a correlated Monte Carlo
//! benchmark.

pub mod config;
pub mod cva;
pub mod error;
pub mod intensity;
pub mod montecarlo;
pub mod params;
pub mod pricers;
pub mod quadrature;
pub mod sweep;

pub use error::{CvaError, Result};
