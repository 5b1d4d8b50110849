//! Default-free call prices `U(t, x, y)` and their Greeks.

mod black;
mod heston;
mod hull_white;
mod lognormal;
mod sabr;

pub use black::{black_call, norm_cdf, norm_pdf};
pub use heston::{heston_call_and_greeks, heston_probabilities};
pub use hull_white::hw_call;
pub use lognormal::{cir_lognormal_match, LognormalMatch};
pub use sabr::{sabr_call_and_greeks, sabr_implied_vol};

use crate::error::Result;
use crate::params::{CorrelationTriple, MarketState, VolModel};
use crate::quadrature::QuadratureConfig;

/// Price and first/second derivatives in log-price `x` and the volatility
/// factor `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceAndGreeks {
    pub u: f64,
    pub ux: f64,
    pub uy: f64,
    pub uxx: Option<f64>,
    pub uxy: Option<f64>,
}

/// Dispatches to the pricer of the given volatility model.
pub fn price_and_greeks(
    vol: &VolModel,
    state: &MarketState,
    corr: &CorrelationTriple,
    quad: &QuadratureConfig,
) -> Result<PriceAndGreeks> {
    match vol {
        VolModel::Sabr(p) => sabr_call_and_greeks(state, p, corr.eta, quad),
        VolModel::HullWhite(p) => hw_call(state, p, corr.eta, quad),
        VolModel::Heston(p) => heston_call_and_greeks(state, p, corr.eta, quad),
    }
}
