//! Affine survival factors for Vasicek and CIR intensities and the
//! conditional expectations of survival-weighted functionals that enter the
//! CVA approximations.
//!
//! The survival martingale is `N^t_s = exp(-int_t^s lambda) * exp(phi(T-s) lambda_s + psi(T-s))`
//! with `phi <= 0`. Its martingale part is `phi(T-s) N sigma lambda^{i/2} dB3`,
//! so the drifts below are written with the duration `B = -phi >= 0`.

use crate::error::{CvaError, Result};
use crate::params::{IntensityKind, IntensityParams};
use crate::quadrature::{cumulative_trapezoid, TimeGrid};

/// Coefficients of the log survival factor: `ln N = phi * lambda + psi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFactors {
    pub phi: f64,
    pub psi: f64,
}

/// `(phi(tau), psi(tau))` for the intensity model.
pub fn affine_factors(params: &IntensityParams, tau: f64) -> Result<AffineFactors> {
    if !(tau >= 0.0) {
        return Err(CvaError::Domain(format!("time to maturity must be non-negative, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(AffineFactors { phi: 0.0, psi: 0.0 });
    }
    Ok(match params.kind {
        IntensityKind::Vasicek => vasicek_factors(params, tau),
        IntensityKind::Cir => cir_factors(params, tau),
    })
}

fn vasicek_factors(p: &IntensityParams, tau: f64) -> AffineFactors {
    let IntensityParams { q, mu, sigma, .. } = *p;
    let phi = (-q * tau).exp_m1() / q;
    let s2 = sigma * sigma;
    let psi = -(mu - s2 / (2.0 * q * q)) * (phi + tau) - s2 * phi * phi / (4.0 * q);
    AffineFactors { phi, psi }
}

fn cir_factors(p: &IntensityParams, tau: f64) -> AffineFactors {
    let IntensityParams { q, mu, sigma, .. } = *p;
    let s2 = sigma * sigma;
    if s2 == 0.0 {
        let phi = (-q * tau).exp_m1() / q;
        return AffineFactors { phi, psi: -mu * (tau + phi) };
    }
    let p_ = (q * q + 2.0 * s2).sqrt();
    let em = (-p_ * tau).exp();
    let phi = -2.0 * (1.0 - em) / ((p_ - q) * em + (p_ + q));
    // (p - q) = 2 sigma^2 / (p + q) keeps the log bracket accurate as sigma -> 0:
    // ln[2p e^{(p+q)tau/2} / (p - q + (p + q) e^{p tau})]
    //   = ln1p(eps) - ln1p(eps e^{-p tau}) - (p - q) tau / 2,  eps = (p - q)/(p + q)
    let p_minus_q = 2.0 * s2 / (p_ + q);
    let eps = p_minus_q / (p_ + q);
    let bracket = eps.ln_1p() - (eps * em).ln_1p() - 0.5 * p_minus_q * tau;
    let psi = 2.0 * q * mu / s2 * bracket;
    AffineFactors { phi, psi }
}

/// A CIR log-factor variant with `e^{(p+q)tau}` instead of `e^{(p+q)tau/2}`
/// inside the logarithm and a leading minus sign. Kept only so tests can
/// show it disagrees with the Riccati system.
#[doc(hidden)]
pub fn cir_psi_full_exponent(params: &IntensityParams, tau: f64) -> f64 {
    let IntensityParams { q, mu, sigma, .. } = *params;
    let p_ = (q * q + 2.0 * sigma * sigma).sqrt();
    let num = 2.0 * p_ * ((p_ + q) * tau).exp();
    let den = p_ - q + (p_ + q) * (p_ * tau).exp();
    -2.0 * q * mu / (sigma * sigma) * (num / den).ln()
}

/// Duration `B(tau) = -phi(tau) >= 0` of the survival factor.
pub fn duration(params: &IntensityParams, tau: f64) -> f64 {
    match affine_factors(params, tau.max(0.0)) {
        Ok(f) => -f.phi,
        Err(_) => 0.0,
    }
}

/// `N = exp(phi(tau) lambda + psi(tau))`, the time-`t` price of survival to
/// `t + tau` given `lambda_t = lambda`.
pub fn survival_factor(params: &IntensityParams, lambda: f64, tau: f64) -> Result<f64> {
    let f = affine_factors(params, tau)?;
    Ok((f.phi * lambda + f.psi).exp())
}

/// How the decay rate of `E_t[N^t_s sqrt(lambda_s)]` is scaled.
///
/// Integrating the drift of `sqrt(lambda) N` with `1/sqrt(lambda)` frozen
/// gives the rate `(q + sigma^2 B)/2`. `Quarter` uses `(q + sigma^2 B)/4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SqrtDecay {
    #[default]
    Ito,
    Quarter,
}

impl SqrtDecay {
    fn factor(self) -> f64 {
        match self {
            SqrtDecay::Ito => 0.5,
            SqrtDecay::Quarter => 0.25,
        }
    }
}

/// CIR survival-weighted moments sampled on a uniform grid over `[t, s_max]`
/// for a survival horizon `T`.
#[derive(Debug, Clone)]
pub struct CirMoments {
    pub grid: TimeGrid,
    /// `N^t_t`.
    pub survival: f64,
    /// Approximation of `E_t[N^t_u sqrt(lambda_u)]` at each grid node.
    pub n_sqrt_lambda: Vec<f64>,
    /// `E_t[N^t_u lambda_u]` at each grid node.
    pub n_lambda: Vec<f64>,
}

impl CirMoments {
    pub fn new(params: &IntensityParams, t: f64, s_max: f64, maturity: f64, dt: f64, decay: SqrtDecay) -> Result<Self> {
        check_cir(params)?;
        check_times(t, s_max, maturity)?;
        if !(params.lambda0 > 0.0) {
            return Err(CvaError::Domain(format!(
                "E[N sqrt(lambda)] needs a positive initial intensity, got {}",
                params.lambda0
            )));
        }
        let grid = TimeGrid::new(t, s_max.max(t + 1e-300), dt);
        let survival = survival_factor(params, params.lambda0, maturity - t)?;
        let rate = cir_rate(params, &grid, maturity);
        let n_sqrt_lambda = n_sqrt_lambda_curve(params, &grid, &rate, survival, decay);
        let n_lambda = n_lambda_curve(params, &grid, &rate, survival);
        Ok(Self { grid, survival, n_sqrt_lambda, n_lambda })
    }
}

/// `q + sigma^2 B(T - u)` on the grid.
fn cir_rate(params: &IntensityParams, grid: &TimeGrid, maturity: f64) -> Vec<f64> {
    let s2 = params.sigma * params.sigma;
    grid.sample(|u| params.q + s2 * duration(params, maturity - u))
}

/// Solves `m' = forcing - r(u) m`, `m(t) = m0`, on the grid by variation of
/// constants with trapezoid integrals.
fn linear_ode_curve(rate: &[f64], step: f64, m0: f64, forcing: f64) -> Vec<f64> {
    let cum = cumulative_trapezoid(rate, step);
    let growth: Vec<f64> = cum.iter().map(|c| c.exp()).collect();
    let inner = cumulative_trapezoid(&growth, step);
    cum.iter().zip(&inner).map(|(c, i)| (-c).exp() * (m0 + forcing * i)).collect()
}

fn n_sqrt_lambda_curve(p: &IntensityParams, grid: &TimeGrid, rate: &[f64], survival: f64, decay: SqrtDecay) -> Vec<f64> {
    // w' = N_t (4 q mu - sigma^2) / (8 sqrt(lambda)) - f (q + sigma^2 B) w
    let f = decay.factor();
    let scaled: Vec<f64> = rate.iter().map(|r| f * r).collect();
    let sl = p.lambda0.sqrt();
    let k = (4.0 * p.q * p.mu - p.sigma * p.sigma) / (8.0 * sl);
    linear_ode_curve(&scaled, grid.step, survival * sl, survival * k)
}

fn n_lambda_curve(p: &IntensityParams, grid: &TimeGrid, rate: &[f64], survival: f64) -> Vec<f64> {
    // m' = q mu N_t - (q + sigma^2 B) m
    linear_ode_curve(rate, grid.step, survival * p.lambda0, survival * p.q * p.mu)
}

fn check_cir(params: &IntensityParams) -> Result<()> {
    if params.kind != IntensityKind::Cir {
        return Err(CvaError::Pairing("expected a CIR intensity".into()));
    }
    Ok(())
}

fn check_vasicek(params: &IntensityParams) -> Result<()> {
    if params.kind != IntensityKind::Vasicek {
        return Err(CvaError::Pairing("expected a Vasicek intensity".into()));
    }
    Ok(())
}

fn check_times(t: f64, s: f64, maturity: f64) -> Result<()> {
    if !(t <= s && s <= maturity) {
        return Err(CvaError::Domain(format!("need t <= s <= T, got t = {t}, s = {s}, T = {maturity}")));
    }
    Ok(())
}

/// Approximation of `E_t[N^t_s sqrt(lambda_s)]` for a CIR intensity started
/// at `params.lambda0`, freezing `1/sqrt(lambda_u)` at its initial value.
pub fn expect_n_sqrt_lambda(params: &IntensityParams, t: f64, s: f64, maturity: f64, dt: f64) -> Result<f64> {
    expect_n_sqrt_lambda_with(params, t, s, maturity, dt, SqrtDecay::default())
}

pub fn expect_n_sqrt_lambda_with(
    params: &IntensityParams,
    t: f64,
    s: f64,
    maturity: f64,
    dt: f64,
    decay: SqrtDecay,
) -> Result<f64> {
    check_cir(params)?;
    check_times(t, s, maturity)?;
    if !(params.lambda0 > 0.0) {
        return Err(CvaError::Domain(format!(
            "E[N sqrt(lambda)] needs a positive initial intensity, got {}",
            params.lambda0
        )));
    }
    if s == t {
        return Ok(survival_factor(params, params.lambda0, maturity - t)? * params.lambda0.sqrt());
    }
    let m = CirMoments::new(params, t, s, maturity, dt, decay)?;
    Ok(*m.n_sqrt_lambda.last().unwrap())
}

/// `E_t[N^t_s lambda_s]` for a CIR intensity started at `params.lambda0`.
pub fn expect_n_lambda(params: &IntensityParams, t: f64, s: f64, maturity: f64, dt: f64) -> Result<f64> {
    check_cir(params)?;
    check_times(t, s, maturity)?;
    let survival = survival_factor(params, params.lambda0, maturity - t)?;
    if s == t {
        return Ok(survival * params.lambda0);
    }
    let grid = TimeGrid::new(t, s, dt);
    let rate = cir_rate(params, &grid, maturity);
    Ok(*n_lambda_curve(params, &grid, &rate, survival).last().unwrap())
}

/// `int_t^s phi(T - u) du` for a Vasicek intensity.
fn vasicek_phi_integral(q: f64, t: f64, s: f64, maturity: f64) -> f64 {
    let d = s - t;
    let e = ((-q * (maturity - s)).exp() - (-q * (maturity - t)).exp()) / q;
    -(d - e) / q
}

/// `E_t[N^t_s Y_s]` for a Vasicek intensity and a driftless lognormal
/// volatility `dY = c Y dB2`, with `<B2, B3> = nu`.
///
/// Evaluated as `y exp(f1 + f2^2/2)` where the exponent of `N^t_s Y_s` is
/// Gaussian with mean `f1` and variance `f2^2`.
pub fn expect_ny_sabr_vasicek(
    vparams: &IntensityParams,
    c: f64,
    y: f64,
    nu: f64,
    t: f64,
    s: f64,
    maturity: f64,
) -> Result<f64> {
    check_vasicek(vparams)?;
    check_times(t, s, maturity)?;
    let IntensityParams { lambda0: lambda, q, mu, sigma, .. } = *vparams;
    let s2 = sigma * sigma;
    let q2 = q * q;
    let phi_tt = (-q * (maturity - t)).exp_m1() / q;
    let e_s = (-q * (maturity - s)).exp();
    let e_t = (-q * (maturity - t)).exp();
    let f1 = -mu * (maturity - t) - 0.5 * c * c * (s - t) + s2 / (2.0 * q2) * (maturity - s)
        + (lambda - mu) * phi_tt
        - s2 / (4.0 * q2) * (3.0 + e_s * e_s - 4.0 * e_s) / q;
    let f2_sq = (s2 / q2 - 2.0 * c * nu * sigma / q) * (s - t)
        - 2.0 * (s2 / q2 - sigma * c * nu / q) * (e_s - e_t) / q
        + s2 / q2 * (e_s * e_s - e_t * e_t) / (2.0 * q)
        + c * c * (s - t);
    Ok(y * (f1 + 0.5 * f2_sq).exp())
}

/// `E_t[N^t_s Y_s]` for a Vasicek intensity and a Hull-White volatility with
/// constant coefficients.
pub fn expect_ny_hw_vasicek(
    vparams: &IntensityParams,
    b: f64,
    c: f64,
    y: f64,
    nu: f64,
    t: f64,
    s: f64,
    maturity: f64,
) -> Result<f64> {
    check_vasicek(vparams)?;
    check_times(t, s, maturity)?;
    let IntensityParams { lambda0: lambda, q, mu, sigma, .. } = *vparams;
    let tau = maturity - t;
    let s2 = sigma * sigma;
    let phi = (-q * tau).exp_m1() / q;
    let base = (s2 / (2.0 * q * q) - mu) * tau
        + (lambda - mu + s2 / (4.0 * q * q) * (3.0 - (-q * tau).exp())) * phi;
    let drift = b * (s - t) + nu * sigma * c * vasicek_phi_integral(q, t, s, maturity);
    Ok(y * (base + drift).exp())
}

/// `E_t[N^t_s G_s]` for a Vasicek intensity and a lognormal factor
/// `dG = b(u) G du + c(u) G dB2`, with `b`, `c` sampled on a grid over
/// `[t, s]`. Returns the values at every grid node.
///
/// Equals `g0 N^t_t exp(int_t^s [b(u) + nu sigma c(u) phi(T-u)] du)`.
pub fn expect_n_lognormal_vasicek(
    vparams: &IntensityParams,
    g0: f64,
    drift: &[f64],
    vol: &[f64],
    nu: f64,
    grid: &TimeGrid,
    maturity: f64,
) -> Result<Vec<f64>> {
    check_vasicek(vparams)?;
    let survival = survival_factor(vparams, vparams.lambda0, maturity - grid.start)?;
    let rate: Vec<f64> = grid
        .points()
        .zip(drift.iter().zip(vol))
        .map(|(u, (b, c))| b - nu * vparams.sigma * c * duration(vparams, maturity - u))
        .collect();
    Ok(cumulative_trapezoid(&rate, grid.step).into_iter().map(|r| g0 * survival * r.exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::builtin_intensity;

    /// RK4 on the backward Riccati system for (phi, psi).
    pub(crate) fn riccati_oracle(p: &IntensityParams, tau: f64) -> (f64, f64) {
        let n = 20_000;
        let h = tau / n as f64;
        let s2 = p.sigma * p.sigma;
        let rhs = |phi: f64| -> (f64, f64) {
            match p.kind {
                IntensityKind::Cir => (0.5 * s2 * phi * phi - p.q * phi - 1.0, p.q * p.mu * phi),
                IntensityKind::Vasicek => (-p.q * phi - 1.0, p.q * p.mu * phi + 0.5 * s2 * phi * phi),
            }
        };
        let (mut phi, mut psi) = (0.0, 0.0);
        for _ in 0..n {
            let k1 = rhs(phi);
            let k2 = rhs(phi + 0.5 * h * k1.0);
            let k3 = rhs(phi + 0.5 * h * k2.0);
            let k4 = rhs(phi + h * k3.0);
            phi += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            psi += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (phi, psi)
    }

    const SETS: [&str; 6] = ["vasicek-1", "vasicek-2", "cir-1", "cir-2", "cir-3", "cir-4"];

    #[test]
    fn zero_horizon() {
        for name in SETS {
            let p = builtin_intensity(name).unwrap();
            assert_eq!(affine_factors(&p, 0.0).unwrap(), AffineFactors { phi: 0.0, psi: 0.0 });
            assert_eq!(survival_factor(&p, 0.7, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn negative_horizon_rejected() {
        let p = builtin_intensity("cir-1").unwrap();
        assert!(matches!(affine_factors(&p, -0.1), Err(CvaError::Domain(_))));
    }

    #[test]
    fn factors_match_riccati_oracle() {
        for name in SETS {
            let p = builtin_intensity(name).unwrap();
            for i in 1..=8 {
                let tau = 0.25 * i as f64;
                let f = affine_factors(&p, tau).unwrap();
                let (phi, psi) = riccati_oracle(&p, tau);
                assert!((f.phi - phi).abs() < 1e-8, "{name} tau={tau} phi");
                assert!((f.psi - psi).abs() < 1e-8, "{name} tau={tau} psi {} vs {psi}", f.psi);
                assert!(f.phi <= 0.0);
            }
        }
    }

    #[test]
    fn full_exponent_cir_log_factor_disagrees_with_riccati() {
        let p = builtin_intensity("cir-3").unwrap();
        let (_, psi) = riccati_oracle(&p, 1.0);
        assert!((cir_psi_full_exponent(&p, 1.0) - psi).abs() > 1e-3);
        assert!((affine_factors(&p, 1.0).unwrap().psi - psi).abs() < 1e-8);
    }

    #[test]
    fn cir_set1_survival_against_oracle() {
        let p = builtin_intensity("cir-1").unwrap();
        let (phi, psi) = riccati_oracle(&p, 1.0);
        let n = survival_factor(&p, 0.03, 1.0).unwrap();
        assert!((n - (phi * 0.03 + psi).exp()).abs() < 1e-8);
    }

    #[test]
    fn deterministic_limit() {
        let det = |q: f64, mu: f64, l: f64, tau: f64| {
            (-mu * tau - (l - mu) * (1.0 - (-q * tau).exp()) / q).exp()
        };
        for kind in [IntensityKind::Vasicek, IntensityKind::Cir] {
            let mut prev_gap = f64::INFINITY;
            for sigma in [1e-2, 1e-3, 1e-4] {
                let p = IntensityParams::new(kind, 0.05, 0.5, 0.1, sigma).unwrap();
                let n = survival_factor(&p, 0.05, 2.0).unwrap();
                let gap = (n / det(0.5, 0.1, 0.05, 2.0) - 1.0).abs();
                assert!(gap < prev_gap);
                prev_gap = gap;
            }
            assert!(prev_gap < 1e-3);
        }
    }

    #[test]
    fn cir_survival_monotone() {
        let p = builtin_intensity("cir-2").unwrap();
        let mut prev = 1.0;
        for i in 1..40 {
            let n = survival_factor(&p, 0.05, 0.05 * i as f64).unwrap();
            assert!(n < prev);
            prev = n;
        }
        assert!(survival_factor(&p, 0.06, 1.0).unwrap() < survival_factor(&p, 0.05, 1.0).unwrap());
    }

    #[test]
    fn moments_at_start() {
        let p = builtin_intensity("cir-2").unwrap();
        let n = survival_factor(&p, p.lambda0, 0.5).unwrap();
        assert_eq!(expect_n_sqrt_lambda(&p, 0.0, 0.0, 0.5, 0.01).unwrap(), n * p.lambda0.sqrt());
        assert_eq!(expect_n_lambda(&p, 0.0, 0.0, 0.5, 0.01).unwrap(), n * p.lambda0);
        let m = CirMoments::new(&p, 0.0, 0.5, 0.5, 0.01, SqrtDecay::Ito).unwrap();
        assert_eq!(m.n_sqrt_lambda[0], n * p.lambda0.sqrt());
        assert_eq!(m.n_lambda[0], n * p.lambda0);
    }

    #[test]
    fn sqrt_moment_domain() {
        let p = IntensityParams::cir(0.0, 0.5, 0.1, 0.1).unwrap();
        assert!(matches!(expect_n_sqrt_lambda(&p, 0.0, 0.2, 0.5, 0.01), Err(CvaError::Domain(_))));
        let v = builtin_intensity("vasicek-1").unwrap();
        assert!(expect_n_sqrt_lambda(&v, 0.0, 0.2, 0.5, 0.01).is_err());
        let c = builtin_intensity("cir-1").unwrap();
        assert!(expect_n_sqrt_lambda(&c, 0.0, 0.6, 0.5, 0.01).is_err());
    }

    #[test]
    fn n_lambda_deterministic_decay() {
        let p = IntensityParams::cir(0.05, 0.7, 0.0, 1e-9).unwrap();
        let n = survival_factor(&p, 0.05, 1.0).unwrap();
        let v = expect_n_lambda(&p, 0.0, 0.4, 1.0, 0.01).unwrap();
        let expected = n * 0.05 * (-0.7f64 * 0.4).exp();
        assert!((v / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn n_sqrt_lambda_small_q_sigma_limit() {
        let p = IntensityParams::cir(0.04, 1e-9, 0.1, 1e-9).unwrap();
        let n = survival_factor(&p, 0.04, 1.0).unwrap();
        let v = expect_n_sqrt_lambda(&p, 0.0, 0.5, 1.0, 0.01).unwrap();
        assert!((v / (n * 0.2) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sabr_vasicek_without_vol_is_the_bond() {
        let p = builtin_intensity("vasicek-1").unwrap();
        let n = survival_factor(&p, p.lambda0, 0.5).unwrap();
        let v = expect_ny_sabr_vasicek(&p, 0.0, 0.7, 0.0, 0.0, 0.3, 0.5).unwrap();
        assert!((v - 0.7 * n).abs() < 1e-14);
        let v = expect_ny_sabr_vasicek(&p, 0.6, 0.7, 0.0, 0.0, 0.0, 0.5).unwrap();
        assert!((v - 0.7 * n).abs() < 1e-14);
    }

    #[test]
    fn sabr_vasicek_matches_lognormal_identity() {
        let p = builtin_intensity("vasicek-2").unwrap();
        for nu in [-0.5, 0.0, 0.3] {
            let a = expect_ny_sabr_vasicek(&p, 0.7356, 0.5887, nu, 0.0, 0.37, 1.0).unwrap();
            let b = expect_ny_hw_vasicek(&p, 0.0, 0.7356, 0.5887, nu, 0.0, 0.37, 1.0).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12, "nu={nu}: {a} vs {b}");
        }
    }

    #[test]
    fn hw_vasicek_at_start_is_the_bond() {
        for name in ["vasicek-1", "vasicek-2"] {
            let p = builtin_intensity(name).unwrap();
            for tau in [0.25, 0.5, 1.0, 3.0] {
                let n = survival_factor(&p, p.lambda0, tau).unwrap();
                let v = expect_ny_hw_vasicek(&p, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, tau).unwrap();
                assert!((v / n - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn hw_vasicek_without_cross_term_ignores_c() {
        let p = builtin_intensity("vasicek-2").unwrap();
        let a = expect_ny_hw_vasicek(&p, 0.0, 0.1, 0.2, 0.0, 0.0, 0.5, 1.0).unwrap();
        let b = expect_ny_hw_vasicek(&p, 0.0, 0.9, 0.2, 0.0, 0.0, 0.5, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lognormal_grid_version_matches_closed_form() {
        let p = builtin_intensity("vasicek-1").unwrap();
        let grid = TimeGrid::new(0.0, 0.8, 0.001);
        let drift = vec![0.05; grid.len()];
        let vol = vec![0.3; grid.len()];
        let v = expect_n_lognormal_vasicek(&p, 0.2, &drift, &vol, 0.4, &grid, 1.0).unwrap();
        let exact = expect_ny_hw_vasicek(&p, 0.05, 0.3, 0.2, 0.4, 0.0, 0.8, 1.0).unwrap();
        assert!((v.last().unwrap() / exact - 1.0).abs() < 1e-7);
    }
}
