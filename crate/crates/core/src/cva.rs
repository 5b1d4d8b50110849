//! First- and second-order correlation expansions of the CVA of a
//! vulnerable call with zero recovery and zero rates.
//!
//! All formulas are written with the survival duration `B = -phi >= 0`, so a
//! positive asset/intensity correlation raises the CVA.

use std::fmt;

use crate::error::{CvaError, Result};
use crate::intensity::{
    duration, expect_n_lognormal_vasicek, expect_ny_hw_vasicek, expect_ny_sabr_vasicek, survival_factor, CirMoments,
    SqrtDecay,
};
use crate::params::{
    CorrelationTriple, HestonParams, HullWhiteParams, IntensityParams, MarketState, ModelPairing, PairingKind,
    SabrParams, VolModel,
};
use crate::pricers::{cir_lognormal_match, price_and_greeks, PriceAndGreeks};
use crate::quadrature::{cumulative_trapezoid, QuadratureConfig, TimeGrid};

pub use crate::quadrature::trapezoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order::First => "first",
            Order::Second => "second",
        })
    }
}

/// Terms of the expansion. `cva1` and `cva2` hold the evaluated correction
/// terms (already multiplied by their correlation factors), so
/// `total = cva0 + cva1 + cva2.unwrap_or(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvaResult {
    pub cva0: f64,
    pub cva1: f64,
    pub cva2: Option<f64>,
    pub total: f64,
    pub order: Order,
    pub pairing: PairingKind,
    /// Default-free price the expansion was built on.
    pub price: f64,
}

/// Moments of a driftless lognormal volatility used in the SABR formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GbmMoments {
    /// `E[Y^i] = y^i exp(i(i-1) c^2 (u-t)/2)`.
    #[default]
    Martingale,
    /// `y^i exp((i-1) c^2 (u-t)/2)`.
    Linear,
}

/// Mean of the Hull-White volatility factor in the CIR pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HwMean {
    /// `y exp((b - c^2/2)(s-t))`, the median of the factor.
    #[default]
    Median,
    /// `y exp(b (s-t))`.
    Martingale,
}

/// Alternative readings of the formulas, kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FormulaOptions {
    pub gbm_moments: GbmMoments,
    pub sqrt_decay: SqrtDecay,
    pub hw_mean: HwMean,
}

struct Setup {
    grid: TimeGrid,
    /// `B(T - s)` on the grid.
    dur: Vec<f64>,
    survival: f64,
    greeks: PriceAndGreeks,
}

fn setup(pairing: &ModelPairing, state: &MarketState, corr: &CorrelationTriple, quad: &QuadratureConfig) -> Result<Setup> {
    quad.validate()?;
    pairing.check(corr)?;
    let p = &pairing.intensity;
    let grid = TimeGrid::new(state.t, state.maturity, quad.dt);
    let dur = grid.sample(|s| duration(p, state.maturity - s));
    let survival = survival_factor(p, p.lambda0, state.tau())?;
    let greeks = price_and_greeks(&pairing.vol, state, corr, quad)?;
    Ok(Setup { grid, dur, survival, greeks })
}

fn weighted(dur: &[f64], values: &[f64]) -> Vec<f64> {
    dur.iter().zip(values).map(|(b, v)| b * v).collect()
}

/// `int_t^T B(T-s) f(s) ds`.
fn outer(g: &Setup, f: &[f64]) -> f64 {
    g.grid.integrate(&weighted(&g.dur, f))
}

/// `int_t^T B(T-s) int_t^s f(u) du ds`.
fn iterated(g: &Setup, f: &[f64]) -> f64 {
    outer(g, &cumulative_trapezoid(f, g.grid.step))
}

fn first_result(g: &Setup, pairing: PairingKind, cva1: f64) -> CvaResult {
    let cva0 = (1.0 - g.survival) * g.greeks.u;
    CvaResult { cva0, cva1, cva2: None, total: cva0 + cva1, order: Order::First, pairing, price: g.greeks.u }
}

/// Lognormal proxy of `sqrt(Y)` for the Heston variance on the grid:
/// `(E[sqrt Y], drift of sqrt Y, vol of sqrt Y)`.
fn heston_sqrt_proxy(h: &HestonParams, state: &MarketState, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (mut mean, mut drift, mut vol) = (Vec::new(), Vec::new(), Vec::new());
    for u in grid.points() {
        let m = cir_lognormal_match(h.k, h.theta, h.c, state.y, state.t, u)?;
        mean.push(m.e_sqrt_y);
        drift.push(0.5 * m.gamma1 - m.gamma2_sq / 8.0);
        vol.push(0.5 * m.gamma2_sq.sqrt());
    }
    Ok((mean, drift, vol))
}

fn hw_mean(hw: &HullWhiteParams, y: f64, dt: f64, variant: HwMean) -> f64 {
    match variant {
        HwMean::Median => y * ((hw.b - 0.5 * hw.c * hw.c) * dt).exp(),
        HwMean::Martingale => y * (hw.b * dt).exp(),
    }
}

fn cir_moments(p: &IntensityParams, state: &MarketState, quad: &QuadratureConfig, decay: SqrtDecay) -> Result<CirMoments> {
    CirMoments::new(p, state.t, state.maturity, state.maturity, quad.dt, decay)
}

/// First-order expansion in the asset/intensity and volatility/intensity
/// correlations.
pub fn cva_first_order(
    pairing: &ModelPairing,
    state: &MarketState,
    corr: &CorrelationTriple,
    quad: &QuadratureConfig,
) -> Result<CvaResult> {
    cva_first_order_with(pairing, state, corr, quad, &FormulaOptions::default())
}

pub fn cva_first_order_with(
    pairing: &ModelPairing,
    state: &MarketState,
    corr: &CorrelationTriple,
    quad: &QuadratureConfig,
    opts: &FormulaOptions,
) -> Result<CvaResult> {
    let g = setup(pairing, state, corr, quad)?;
    let p = &pairing.intensity;
    let (rho, nu, sigma) = (corr.rho, corr.nu, p.sigma);
    let PriceAndGreeks { ux, uy, .. } = g.greeks;
    let (t, mat, y) = (state.t, state.maturity, state.y);
    let kind = pairing.kind();
    let cva1 = match (kind, &pairing.vol) {
        (PairingKind::SabrVasicek, VolModel::Sabr(s)) => {
            let ny = sample(&g.grid, |u| expect_ny_sabr_vasicek(p, s.c, y, nu, t, u, mat))?;
            let i = outer(&g, &ny);
            sigma * (rho * ux * (-(1.0 - s.gamma) * state.x).exp() + s.c * nu * uy) * i
        }
        (PairingKind::HullWhiteVasicek, VolModel::HullWhite(h)) => {
            let ny = sample(&g.grid, |u| expect_ny_hw_vasicek(p, h.b, h.c, y, nu, t, u, mat))?;
            let i = outer(&g, &ny);
            sigma * (rho * ux + nu * h.c * uy) * i
        }
        (PairingKind::HestonVasicek, VolModel::Heston(h)) => {
            let (_, drift, vol) = heston_sqrt_proxy(h, state, &g.grid)?;
            let ny = expect_n_lognormal_vasicek(p, y.sqrt(), &drift, &vol, nu, &g.grid, mat)?;
            sigma * (rho * ux + h.c * nu * uy) * outer(&g, &ny)
        }
        (PairingKind::SabrCir, VolModel::Sabr(s)) => {
            let m = cir_moments(p, state, quad, opts.sqrt_decay)?;
            let i = y * outer(&g, &m.n_sqrt_lambda);
            sigma * (rho * (-(1.0 - s.gamma) * state.x).exp() * ux + nu * s.c * uy) * i
        }
        (PairingKind::HullWhiteCir, VolModel::HullWhite(h)) => {
            let m = cir_moments(p, state, quad, opts.sqrt_decay)?;
            let f: Vec<f64> =
                g.grid.points().zip(&m.n_sqrt_lambda).map(|(u, w)| w * hw_mean(h, y, u - t, opts.hw_mean)).collect();
            let i = outer(&g, &f);
            sigma * (rho * ux + nu * h.c * uy) * i
        }
        (PairingKind::HestonCir, VolModel::Heston(h)) => {
            let m = cir_moments(p, state, quad, opts.sqrt_decay)?;
            let (mean, _, _) = heston_sqrt_proxy(h, state, &g.grid)?;
            let f: Vec<f64> = m.n_sqrt_lambda.iter().zip(&mean).map(|(w, e)| w * e).collect();
            sigma * (rho * ux + h.c * nu * uy) * outer(&g, &f)
        }
        _ => unreachable!("pairing kind follows the volatility model"),
    };
    Ok(first_result(&g, kind, cva1))
}

fn sample<F: FnMut(f64) -> Result<f64>>(grid: &TimeGrid, f: F) -> Result<Vec<f64>> {
    grid.points().map(f).collect()
}

/// Second-order expansion in the asset/intensity correlation for the CIR
/// pairings of SABR and Heston, with no volatility/intensity correlation.
pub fn cva_second_order(
    pairing: &ModelPairing,
    state: &MarketState,
    eta: f64,
    rho: f64,
    quad: &QuadratureConfig,
) -> Result<CvaResult> {
    cva_second_order_with(pairing, state, eta, rho, quad, &FormulaOptions::default())
}

pub fn cva_second_order_with(
    pairing: &ModelPairing,
    state: &MarketState,
    eta: f64,
    rho: f64,
    quad: &QuadratureConfig,
    opts: &FormulaOptions,
) -> Result<CvaResult> {
    let kind = pairing.kind();
    if !matches!(kind, PairingKind::SabrCir | PairingKind::HestonCir) {
        return Err(CvaError::UnsupportedPairing(kind.to_string()));
    }
    let corr = CorrelationTriple::new(eta, rho, 0.0)?;
    let g = setup(pairing, state, &corr, quad)?;
    let p = &pairing.intensity;
    let m = cir_moments(p, state, quad, opts.sqrt_decay)?;
    let (c1, c2) = match &pairing.vol {
        VolModel::Sabr(s) => sabr_cir_terms(&g, &m, s, state, eta, opts.gbm_moments),
        VolModel::Heston(h) => heston_cir_terms(&g, &m, h, p, state, eta)?,
        VolModel::HullWhite(_) => unreachable!(),
    };
    let rs = rho * p.sigma;
    let cva0 = (1.0 - g.survival) * g.greeks.u;
    let (cva1, cva2) = (rs * c1, rs * rs * c2);
    Ok(CvaResult {
        cva0,
        cva1,
        cva2: Some(cva2),
        total: cva0 + cva1 + cva2,
        order: Order::Second,
        pairing: kind,
        price: g.greeks.u,
    })
}

/// Coefficients of `rho sigma` and `(rho sigma)^2` for SABR with CIR.
fn sabr_cir_terms(
    g: &Setup,
    m: &CirMoments,
    s: &SabrParams,
    state: &MarketState,
    eta: f64,
    moments: GbmMoments,
) -> (f64, f64) {
    let PriceAndGreeks { ux, uxx, uxy, .. } = g.greeks;
    let (uxx, uxy) = (uxx.unwrap_or(0.0), uxy.unwrap_or(0.0));
    let (gm, c, y, t) = (s.gamma, s.c, state.y, state.t);
    let z0 = (-(1.0 - gm) * state.x).exp();
    let f = |i: i32, u: f64| -> f64 {
        let e = match moments {
            GbmMoments::Martingale => (i * (i - 1)) as f64,
            GbmMoments::Linear => (i - 1) as f64,
        };
        (z0 * y).powi(i) * (0.5 * e * c * c * (u - t)).exp()
    };
    let w = &m.n_sqrt_lambda;
    let pts: Vec<f64> = g.grid.points().collect();
    let f1 = z0 * y;
    let wf2: Vec<f64> = pts.iter().zip(w).map(|(&u, w)| w * f(2, u)).collect();
    let mixed: Vec<f64> = pts.iter().zip(w).map(|(&u, w)| w * (c * eta * f(2, u) + 0.5 * gm * f(3, u))).collect();
    let line1 = ux * f1 * outer(g, w);
    let line2 = -(1.0 - gm) * ux * iterated(g, &mixed);
    let line3 = eta * c * uxx * iterated(g, &wf2);
    let line4 = c * c * uxy * iterated(g, &wf2) / z0;
    let second: Vec<f64> = pts
        .iter()
        .zip(&g.dur)
        .zip(&m.n_lambda)
        .map(|((&u, b), nl)| f(2, u) * (0.5 * m.survival - b * nl))
        .collect();
    let c2 = (uxx - (1.0 - gm) * ux) * iterated(g, &second);
    (line1 + line2 + line3 + line4, c2)
}

/// Coefficients of `rho sigma` and `(rho sigma)^2` for Heston with CIR.
fn heston_cir_terms(
    g: &Setup,
    m: &CirMoments,
    h: &HestonParams,
    p: &IntensityParams,
    state: &MarketState,
    eta: f64,
) -> Result<(f64, f64)> {
    let PriceAndGreeks { ux, uxx, uxy, .. } = g.greeks;
    let (uxx, uxy) = (uxx.unwrap_or(0.0), uxy.unwrap_or(0.0));
    let (lam, y) = (p.lambda0, state.y);
    let (mut esq, mut ey) = (Vec::new(), Vec::new());
    for u in g.grid.points() {
        let lm = cir_lognormal_match(h.k, h.theta, h.c, y, state.t, u)?;
        esq.push(lm.e_sqrt_y);
        ey.push(lm.e_y);
    }
    let w = &m.n_sqrt_lambda;
    let k_lam = (4.0 * p.q * p.mu - p.sigma * p.sigma) / (8.0 * lam.sqrt());
    let k_y = (4.0 * h.k * h.theta - h.c * h.c) / (8.0 * y.sqrt());
    let cum_esq = cumulative_trapezoid(&esq, g.grid.step);
    let start: Vec<f64> = cum_esq.iter().map(|ce| (lam * y).sqrt() + k_lam * ce).collect();
    let drift: Vec<f64> = esq
        .iter()
        .zip(w)
        .zip(&g.dur)
        .map(|((e, w), b)| (k_y - 0.5 * (p.q + h.k + p.sigma * p.sigma * b) * e) * w)
        .collect();
    let esq_w: Vec<f64> = esq.iter().zip(w).map(|(e, w)| e * w).collect();
    let cross = iterated(g, &esq_w);
    let c1 = ux * (m.survival * outer(g, &start) + iterated(g, &drift)) + 0.5 * eta * h.c * uxx * cross
        + 0.5 * h.c * h.c * uxy * cross;
    let second: Vec<f64> = ey
        .iter()
        .zip(&g.dur)
        .zip(&m.n_lambda)
        .map(|((e, b), nl)| e * (0.5 * m.survival - b * nl))
        .collect();
    Ok((c1, uxx * iterated(g, &second)))
}
