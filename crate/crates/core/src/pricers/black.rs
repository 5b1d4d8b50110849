use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

use super::PriceAndGreeks;

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Black call on `e^x` with log-strike `kappa` and zero rates. `uy` is the
/// derivative in `vol` and `uxy` the mixed `x`/`vol` derivative.
pub fn black_call(x: f64, kappa: f64, vol: f64, tau: f64) -> PriceAndGreeks {
    let sd = vol * tau.max(0.0).sqrt();
    let (ex, ek) = (x.exp(), kappa.exp());
    if !(sd > 0.0) {
        let itm = x > kappa;
        return PriceAndGreeks {
            u: (ex - ek).max(0.0),
            ux: if itm { ex } else { 0.0 },
            uy: 0.0,
            uxx: Some(if itm { ex } else { 0.0 }),
            uxy: Some(0.0),
        };
    }
    let d1 = (x - kappa) / sd + 0.5 * sd;
    let d2 = d1 - sd;
    let (n1, p1) = (norm_cdf(d1), norm_pdf(d1));
    PriceAndGreeks {
        u: ex * n1 - ek * norm_cdf(d2),
        ux: ex * n1,
        uy: ex * p1 * tau.sqrt(),
        uxx: Some(ex * (n1 + p1 / sd)),
        uxy: Some(-ex * p1 * d2 / vol),
    }
}
