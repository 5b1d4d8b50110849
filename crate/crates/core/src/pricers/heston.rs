use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{CvaError, Result};
use crate::params::{HestonParams, MarketState};
use crate::quadrature::{adaptive_panels, QuadratureConfig};

use super::PriceAndGreeks;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `ln(1 + h) / h`.
fn log1p_ratio(h: Complex64) -> Complex64 {
    if h.norm() < 1e-4 {
        1.0 - h / 2.0 + h * h / 3.0 - h * h * h / 4.0
    } else {
        (1.0 + h).ln() / h
    }
}

/// `(C_j, D_j)` of the characteristic function of the j-th measure.
/// Written so that every `1/c^2` is cancelled analytically.
fn c_and_d(p: &HestonParams, eta: f64, j: usize, zeta: f64, tau: f64) -> (Complex64, Complex64) {
    let (u, b) = if j == 1 { (0.5, p.k - eta * p.c) } else { (-0.5, p.k) };
    let iz = I * zeta;
    let bp = b - eta * p.c * iz;
    let w = 2.0 * u * iz - zeta * zeta;
    let d = (bp * bp - p.c * p.c * w).sqrt();
    let plus = bp + d;
    // bp - d = c^2 w / (bp + d), g = (bp - d)/(bp + d)
    let minus_over_c2 = w / plus;
    let g = p.c * p.c * w / (plus * plus);
    let e = (-d * tau).exp();
    let one_minus_e = 1.0 - e;
    let dd = minus_over_c2 * one_minus_e / (1.0 - g * e);
    let h = g * one_minus_e / (1.0 - g);
    let log_term_over_c2 = (w / (plus * plus)) * one_minus_e / (1.0 - g) * log1p_ratio(h);
    let cc = p.k * p.theta * (minus_over_c2 * tau - 2.0 * log_term_over_c2);
    (cc, dd)
}

/// Integrals (times `1/pi`) entering `P_j` and its `x`, `xx`, `y`, `xy`
/// derivatives, for `j = 1, 2`.
fn integrals(state: &MarketState, p: &HestonParams, eta: f64, quad: &QuadratureConfig) -> Result<[f64; 10]> {
    let tau = state.tau();
    let lm = state.x - state.kappa;
    let integrand = |zeta: f64| -> [f64; 10] {
        let mut out = [0.0; 10];
        for j in 1..=2 {
            let (cc, dd) = c_and_d(p, eta, j, zeta, tau);
            let f = (cc + dd * state.y + I * zeta * lm).exp();
            let iz = I * zeta;
            let o = 5 * (j - 1);
            out[o] = (f / iz).re;
            out[o + 1] = f.re;
            out[o + 2] = (iz * f).re;
            out[o + 3] = (dd * f / iz).re;
            out[o + 4] = (dd * f).re;
        }
        out
    };
    let tail = integrand(quad.upper_limit);
    if tail[0].abs().max(tail[5].abs()) > 1e-12 {
        return Err(CvaError::Quadrature(format!(
            "Heston integrand is {:.3e} at the truncation point {}; raise the upper limit",
            tail[0].abs().max(tail[5].abs()),
            quad.upper_limit
        )));
    }
    let r = adaptive_panels(integrand, quad.upper_limit, quad.n_nodes, 1e-9)?;
    Ok(r.map(|v| v / PI))
}

/// `(P_1, P_2)`.
pub fn heston_probabilities(
    state: &MarketState,
    heston: &HestonParams,
    eta: f64,
    quad: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let r = integrals(state, heston, eta, quad)?;
    Ok((0.5 + r[0], 0.5 + r[5]))
}

/// Fourier price of the call with Greeks by differentiation under the
/// integral sign.
pub fn heston_call_and_greeks(
    state: &MarketState,
    heston: &HestonParams,
    eta: f64,
    quad: &QuadratureConfig,
) -> Result<PriceAndGreeks> {
    let r = integrals(state, heston, eta, quad)?;
    let (ex, ek) = (state.x.exp(), state.kappa.exp());
    let p1 = 0.5 + r[0];
    let p2 = 0.5 + r[5];
    let out = PriceAndGreeks {
        u: ex * p1 - ek * p2,
        ux: ex * (p1 + r[1]) - ek * r[6],
        uy: ex * r[3] - ek * r[8],
        uxx: Some(ex * (p1 + 2.0 * r[1] + r[2]) - ek * r[7]),
        uxy: Some(ex * (r[3] + r[4]) - ek * r[9]),
    };
    if !out.u.is_finite() {
        return Err(CvaError::Numerical("Heston price is not finite".into()));
    }
    Ok(out)
}
