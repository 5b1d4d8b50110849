use crate::error::{CvaError, Result};
use crate::params::{HullWhiteParams, MarketState};
use crate::quadrature::{gauss_legendre_integrate, QuadratureConfig};

use super::{black_call, norm_pdf, PriceAndGreeks};

/// `(e^{a tau} - 1) / a`, continuous at `a = 0`.
fn growth_integral(a: f64, tau: f64) -> f64 {
    if (a * tau).abs() < 1e-12 {
        tau
    } else {
        (a * tau).exp_m1() / a
    }
}

/// First-order expansion in `eta` of the call price.
fn hw_price(state: &MarketState, hw: &HullWhiteParams, eta: f64) -> f64 {
    let HullWhiteParams { b, c } = *hw;
    let MarketState { x, y, kappa, .. } = *state;
    let tau = state.tau();
    let a = 2.0 * b + c * c;
    let var = y * y * growth_integral(a, tau);
    let g0 = black_call(x, kappa, (var / tau).sqrt(), tau).u;
    if eta == 0.0 {
        return g0;
    }
    let sd = var.sqrt();
    let d2 = (x - kappa - 0.5 * var) / sd;
    let a4 = 4.0 * b + 6.0 * c * c;
    let y4 = y.powi(4);
    let kernel = gauss_legendre_integrate(
        |s| {
            let inner = gauss_legendre_integrate(|u| (a * (u - s)).exp(), s, tau, 32);
            c * y4 * (a4 * s).exp() * inner
        },
        0.0,
        tau,
        32,
    );
    let g1 = -kappa.exp() / y * d2 * norm_pdf(d2) / var * kernel;
    g0 + eta * g1
}

/// Call price under Hull-White stochastic volatility, Greeks by central
/// differences.
pub fn hw_call(state: &MarketState, hw: &HullWhiteParams, eta: f64, _quad: &QuadratureConfig) -> Result<PriceAndGreeks> {
    if eta > 0.0 {
        return Err(CvaError::Domain(format!("Hull-White pricer needs eta <= 0, got {eta}")));
    }
    let u = hw_price(state, hw, eta);
    if !u.is_finite() {
        return Err(CvaError::Numerical("Hull-White price is not finite".into()));
    }
    let (hx, hy) = (1e-4, 1e-4 * state.y);
    let at = |x: f64, y: f64| hw_price(&MarketState { x, y, ..*state }, hw, eta);
    let (x, y) = (state.x, state.y);
    let (xp, xm) = (at(x + hx, y), at(x - hx, y));
    let ux = (xp - xm) / (2.0 * hx);
    let uy = (at(x, y + hy) - at(x, y - hy)) / (2.0 * hy);
    let uxx = (xp - 2.0 * u + xm) / (hx * hx);
    let uxy = (at(x + hx, y + hy) - at(x + hx, y - hy) - at(x - hx, y + hy) + at(x - hx, y - hy)) / (4.0 * hx * hy);
    Ok(PriceAndGreeks { u, ux, uy, uxx: Some(uxx), uxy: Some(uxy) })
}
