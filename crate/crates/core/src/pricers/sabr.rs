use crate::error::{CvaError, Result};
use crate::params::{MarketState, SabrParams};
use crate::quadrature::QuadratureConfig;

use super::{black_call, norm_pdf, PriceAndGreeks};

/// `delta(m) = ln[(m - eta + sqrt((m - eta)^2 + 1 - eta^2)) / (1 - eta)]`,
/// arranged to avoid cancellation for small and for large negative `m`.
fn delta(m: f64, eta: f64) -> f64 {
    let s = ((m - eta) * (m - eta) + 1.0 - eta * eta).sqrt();
    if m >= -0.5 {
        let t = m + (m * m - 2.0 * eta * m) / (s + 1.0);
        (t / (1.0 - eta)).ln_1p()
    } else if m - eta < 0.0 {
        ((1.0 + eta) / (s - (m - eta))).ln()
    } else {
        ((m - eta + s) / (1.0 - eta)).ln()
    }
}

/// `m / delta(m)` with its series near the money.
fn m_over_delta(m: f64, eta: f64) -> f64 {
    if m.abs() < 1e-6 {
        1.0 - 0.5 * eta * m + (2.0 - 3.0 * eta * eta) * m * m / 12.0
    } else {
        m / delta(m, eta)
    }
}

/// Truncated Hagan implied volatility for the CEV-SABR asset.
pub fn sabr_implied_vol(state: &MarketState, sabr: &SabrParams, eta: f64) -> Result<f64> {
    let MarketState { x, y, kappa, .. } = *state;
    let SabrParams { gamma, c } = *sabr;
    let g = 1.0 - gamma;
    let lm = x - kappa;
    let half = ((x + kappa) * 0.5 * g).exp();
    let pre = y / (half * (1.0 + g * g / 24.0 * lm * lm + g.powi(4) / 1920.0 * lm.powi(4)));
    let m = c / y * half * lm;
    let ratio = m_over_delta(m, eta);
    let corr = 1.0
        + (g * g / 24.0 * y * y / (half * half)
            + 0.25 * eta * gamma * c * y / half
            + (2.0 - 3.0 * eta * eta) / 24.0 * c * c)
            * state.tau();
    let vol = pre * ratio * corr;
    if !(vol.is_finite() && vol > 0.0) {
        return Err(CvaError::Numerical(format!("SABR implied volatility is {vol} at x = {x}, y = {y}")));
    }
    Ok(vol)
}

/// Central difference with one Richardson step.
fn richardson<F: Fn(f64) -> Result<f64>>(f: F, at: f64, h: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((f(at + h)? - f(at - h)?) / (2.0 * h)) };
    let (coarse, fine) = (d(h)?, d(0.5 * h)?);
    Ok((4.0 * fine - coarse) / 3.0)
}

fn first_order(state: &MarketState, sabr: &SabrParams, eta: f64) -> Result<(f64, f64, f64)> {
    let vol = sabr_implied_vol(state, sabr, eta)?;
    let hx = 1e-6 * state.x.abs().max(1.0);
    let hy = 1e-6 * state.y;
    let dvx = richardson(|x| sabr_implied_vol(&state.with_x(x), sabr, eta), state.x, hx)?;
    let dvy = richardson(|y| sabr_implied_vol(&state.with_y(y), sabr, eta), state.y, hy)?;
    let b = black_call(state.x, state.kappa, vol, state.tau());
    let sd = vol * state.tau().sqrt();
    let d1 = (state.x - state.kappa) / sd + 0.5 * sd;
    let vega = state.tau().sqrt() * state.x.exp() * norm_pdf(d1);
    Ok((b.u, b.ux + vega * dvx, vega * dvy))
}

/// Call price at the SABR implied volatility with chain-rule Greeks.
pub fn sabr_call_and_greeks(
    state: &MarketState,
    sabr: &SabrParams,
    eta: f64,
    _quad: &QuadratureConfig,
) -> Result<PriceAndGreeks> {
    let (u, ux, uy) = first_order(state, sabr, eta)?;
    let hx = 1e-4;
    let hy = 1e-4 * state.y;
    let ux_at = |s: MarketState| first_order(&s, sabr, eta).map(|v| v.1);
    let uxx = (ux_at(state.with_x(state.x + hx))? - ux_at(state.with_x(state.x - hx))?) / (2.0 * hx);
    let uxy = (ux_at(state.with_y(state.y + hy))? - ux_at(state.with_y(state.y - hy))?) / (2.0 * hy);
    Ok(PriceAndGreeks { u, ux, uy, uxx: Some(uxx), uxy: Some(uxy) })
}
