use crate::error::{CvaError, Result};

/// Lognormal proxy for a CIR variance: `gamma1`, `gamma2^2` at `s` and the
/// resulting `E[sqrt(Y_s)]`, together with the exact `E[Y_s]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalMatch {
    pub gamma1: f64,
    pub gamma2_sq: f64,
    pub e_sqrt_y: f64,
    pub e_y: f64,
}

fn moments(k: f64, theta: f64, c: f64, y: f64, tau: f64) -> ([f64; 2], [f64; 2]) {
    let e1 = (-k * tau).exp();
    let e2 = e1 * e1;
    let a = (y - theta) * (y - theta) - c * c / k * (y - 0.5 * theta);
    let b = (y - theta) * (2.0 * theta + c * c / k);
    let m1 = theta + (y - theta) * e1;
    let m2 = a * e2 + b * e1 + theta * (theta + c * c / (2.0 * k));
    let dm1 = -k * (y - theta) * e1;
    let dm2 = -2.0 * k * a * e2 - k * b * e1;
    ([m1, m2], [dm1, dm2])
}

/// Matches the first two moments of the square-root variance with a
/// lognormal process started at `y`.
///
/// The time integrals of `gamma1` and `gamma2^2` are `ln(m1/y)` and
/// `ln(m2/m1^2)`, so `E[sqrt(Y_s)] = sqrt(m1) (m1^2/m2)^{1/8}`.
pub fn cir_lognormal_match(k: f64, theta: f64, c: f64, y: f64, t: f64, s: f64) -> Result<LognormalMatch> {
    if !(s >= t) {
        return Err(CvaError::Domain(format!("need s >= t, got t = {t}, s = {s}")));
    }
    if !(y > 0.0) {
        return Err(CvaError::Domain(format!("variance must be positive, got {y}")));
    }
    let ([m1, m2], [dm1, dm2]) = moments(k, theta, c, y, s - t);
    let gamma1 = dm1 / m1;
    let mut gamma2_sq = dm2 / m2 - 2.0 * gamma1;
    if gamma2_sq < -1e-12 {
        return Err(CvaError::Numerical(format!(
            "matched lognormal variance rate is negative ({gamma2_sq:.3e}) at s = {s}"
        )));
    }
    gamma2_sq = gamma2_sq.max(0.0);
    let ratio = (m1 * m1 / m2).min(1.0);
    Ok(LognormalMatch { gamma1, gamma2_sq, e_sqrt_y: m1.sqrt() * ratio.powf(0.125), e_y: m1 })
}
