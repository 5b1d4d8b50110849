//! Correlated Monte Carlo benchmark for the CVA with the default-free payoff
//! as control variate.
//!
//! Schemes: log-Euler asset with coefficients frozen at the start of each
//! step; exact lognormal SABR and Hull-White volatility; full-truncation
//! Euler for the Heston variance and the CIR intensity; exact Gaussian
//! transition for the Vasicek intensity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{CvaError, Result};
use crate::intensity::survival_factor;
use crate::params::{CorrelationTriple, IntensityKind, IntensityParams, MarketState, ModelPairing, VolModel};
use crate::pricers::price_and_greeks;
use crate::quadrature::QuadratureConfig;

/// Log-price below which a CEV asset is treated as absorbed at zero.
const ABSORBED: f64 = -40.0;
const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Paths of the independent pilot run that estimates the control-variate
    /// mean when no exact price is available (Hull-White). Zero means
    /// `n_paths`.
    pub pilot_paths: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_paths: 100_000, n_steps: 500, seed: 42, pilot_paths: 0 }
    }
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Result<Self> {
        let c = Self { n_paths, n_steps, seed, pilot_paths: 0 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 || self.n_steps < 1 {
            return Err(CvaError::InvalidParameter(format!(
                "need at least 2 paths and 1 step, got {} paths and {} steps",
                self.n_paths, self.n_steps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// Control-variate adjusted estimate.
    pub mean: f64,
    pub std_error: f64,
    /// Plain sample mean and its standard error.
    pub raw_mean: f64,
    pub raw_std_error: f64,
    /// Sample correlation between payoff and control variate.
    pub cv_correlation: f64,
    pub cv_beta: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

/// Loadings of `(dB1, dB2, dB3)` on three independent Brownian increments
/// `(dB, dZ, dU)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loadings {
    eta: f64,
    eta_c: f64,
    nu: f64,
    alpha: f64,
    beta: f64,
}

impl Loadings {
    pub fn new(corr: &CorrelationTriple) -> Self {
        Self {
            eta: corr.eta,
            eta_c: (1.0 - corr.eta * corr.eta).sqrt(),
            nu: corr.nu,
            alpha: corr.alpha(),
            beta: corr.beta(),
        }
    }

    /// `dB1 = eta dB + sqrt(1-eta^2) dZ`, `dB2 = dB`,
    /// `dB3 = nu dB + alpha dZ + beta dU`.
    pub fn apply(&self, db: f64, dz: f64, du: f64) -> [f64; 3] {
        [self.eta * db + self.eta_c * dz, db, self.nu * db + self.alpha * dz + self.beta * du]
    }
}

/// One draw of correlated Brownian increments over a step `dt`.
pub fn correlated_increments<R: Rng + ?Sized>(corr: &CorrelationTriple, dt: f64, rng: &mut R) -> [f64; 3] {
    let s = dt.sqrt();
    let db: f64 = rng.sample(StandardNormal);
    let dz: f64 = rng.sample(StandardNormal);
    let du: f64 = rng.sample(StandardNormal);
    Loadings::new(corr).apply(s * db, s * dz, s * du)
}

/// Terminal log-prices and integrated intensities, one entry per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub x_terminal: Vec<f64>,
    pub int_lambda: Vec<f64>,
    /// Paths on which a Vasicek intensity went negative at some grid node.
    pub negative_intensity_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl PathBatch {
    pub fn len(&self) -> usize {
        self.x_terminal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_terminal.is_empty()
    }
}

/// Random stream of path `i`; independent of how paths are scheduled.
pub fn path_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

struct Stepper {
    vol: VolModel,
    intensity: Option<IntensityParams>,
    load: Loadings,
    dt: f64,
    sdt: f64,
    /// Vasicek one-step decay and conditional standard deviation.
    vas_decay: f64,
    vas_sd: f64,
}

impl Stepper {
    fn new(vol: VolModel, intensity: Option<IntensityParams>, corr: &CorrelationTriple, dt: f64) -> Self {
        let (mut vas_decay, mut vas_sd) = (0.0, 0.0);
        if let Some(p) = intensity.filter(|p| p.kind == IntensityKind::Vasicek) {
            vas_decay = (-p.q * dt).exp();
            vas_sd = p.sigma * (-(-2.0 * p.q * dt).exp_m1() / (2.0 * p.q)).sqrt();
        }
        Self { vol, intensity, load: Loadings::new(corr), dt, sdt: dt.sqrt(), vas_decay, vas_sd }
    }

    fn path(&self, state: &MarketState, n_steps: usize, rng: &mut ChaCha8Rng) -> (f64, f64, bool) {
        let (mut x, mut y) = (state.x, state.y);
        let mut lam = self.intensity.map_or(0.0, |p| p.lambda0);
        let (mut integral, mut negative) = (0.0, false);
        let dt = self.dt;
        for _ in 0..n_steps {
            let db: f64 = rng.sample(StandardNormal);
            let dz: f64 = rng.sample(StandardNormal);
            let du: f64 = if self.intensity.is_some() { rng.sample(StandardNormal) } else { 0.0 };
            let [z1, z2, z3] = self.load.apply(db, dz, du);
            let (db1, db2) = (z1 * self.sdt, z2 * self.sdt);
            match self.vol {
                VolModel::Sabr(p) => {
                    if x > ABSORBED {
                        let a = y * (-(1.0 - p.gamma) * x).exp();
                        x += -0.5 * a * a * dt + a * db1;
                    }
                    y *= (p.c * db2 - 0.5 * p.c * p.c * dt).exp();
                }
                VolModel::HullWhite(p) => {
                    x += -0.5 * y * y * dt + y * db1;
                    y *= ((p.b - 0.5 * p.c * p.c) * dt + p.c * db2).exp();
                }
                VolModel::Heston(p) => {
                    let yp = y.max(0.0);
                    let sy = yp.sqrt();
                    x += -0.5 * yp * dt + sy * db1;
                    y += p.k * (p.theta - yp) * dt + p.c * sy * db2;
                }
            }
            if let Some(p) = &self.intensity {
                match p.kind {
                    IntensityKind::Cir => {
                        let lp = lam.max(0.0);
                        let next = lam + p.q * (p.mu - lp) * dt + p.sigma * lp.sqrt() * self.sdt * z3;
                        integral += 0.5 * dt * (lp + next.max(0.0));
                        lam = next;
                    }
                    IntensityKind::Vasicek => {
                        let next = p.mu + (lam - p.mu) * self.vas_decay + self.vas_sd * z3;
                        integral += 0.5 * dt * (lam + next);
                        lam = next;
                        negative |= lam < 0.0;
                    }
                }
            }
        }
        if x <= ABSORBED {
            x = f64::NEG_INFINITY;
        }
        (x, integral, negative)
    }
}

fn run(stepper: &Stepper, state: &MarketState, mc: &McConfig, seed: u64, n_paths: usize) -> PathBatch {
    let blocks: Vec<Vec<(f64, f64, bool)>> = (0..n_paths.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(n_paths);
            (lo..hi)
                .map(|i| stepper.path(state, mc.n_steps, &mut path_rng(seed, i as u64)))
                .collect()
        })
        .collect();
    let mut out = PathBatch {
        x_terminal: Vec::with_capacity(n_paths),
        int_lambda: Vec::with_capacity(n_paths),
        negative_intensity_paths: 0,
        n_steps: mc.n_steps,
        seed,
    };
    for (x, l, neg) in blocks.into_iter().flatten() {
        out.x_terminal.push(x);
        out.int_lambda.push(l);
        out.negative_intensity_paths += neg as usize;
    }
    out
}

/// Simulates `mc.n_paths` joint paths of asset, volatility and intensity.
pub fn simulate_paths(
    pairing: &ModelPairing,
    state: &MarketState,
    corr: &CorrelationTriple,
    mc: &McConfig,
) -> Result<PathBatch> {
    mc.validate()?;
    pairing.check(corr)?;
    let stepper = Stepper::new(pairing.vol, Some(pairing.intensity), corr, state.tau() / mc.n_steps as f64);
    Ok(run(&stepper, state, mc, mc.seed, mc.n_paths))
}

/// Simulates the asset and volatility only.
pub fn simulate_default_free(vol: &VolModel, state: &MarketState, eta: f64, mc: &McConfig) -> Result<PathBatch> {
    mc.validate()?;
    let corr = CorrelationTriple::new(eta, 0.0, 0.0)?;
    let stepper = Stepper::new(*vol, None, &corr, state.tau() / mc.n_steps as f64);
    Ok(run(&stepper, state, mc, mc.seed, mc.n_paths))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Plain Monte Carlo estimate of the call price on the given paths.
pub fn mc_price(paths: &PathBatch, kappa: f64) -> McEstimate {
    let k = kappa.exp();
    let c: Vec<f64> = paths.x_terminal.iter().map(|x| (x.exp() - k).max(0.0)).collect();
    let m = mean(&c);
    let n = c.len() as f64;
    let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    McEstimate {
        mean: m,
        std_error: se,
        raw_mean: m,
        raw_std_error: se,
        cv_correlation: 1.0,
        cv_beta: 0.0,
        n_paths: c.len(),
        n_steps: paths.n_steps,
        seed: paths.seed,
    }
}

/// Estimated or exact mean of the control variate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlMean {
    Exact(f64),
    /// Sample mean and its standard error from an independent run.
    Pilot { mean: f64, std_error: f64 },
}

/// CVA estimate from simulated paths with payoff
/// `(1 - e^{-int lambda}) (e^{X_T} - e^kappa)^+` and control variate
/// `(e^{X_T} - e^kappa)^+`.
pub fn mc_cva(paths: &PathBatch, state: &MarketState, control: ControlMean) -> Result<McEstimate> {
    let k = state.kappa.exp();
    let n = paths.len();
    let c: Vec<f64> = paths.x_terminal.iter().map(|x| (x.exp() - k).max(0.0)).collect();
    let p: Vec<f64> = c.iter().zip(&paths.int_lambda).map(|(c, l)| -(-l).exp_m1() * c).collect();
    let (mp, mc) = (mean(&p), mean(&c));
    let (mut spp, mut scc, mut spc) = (0.0, 0.0, 0.0);
    for (a, b) in p.iter().zip(&c) {
        let (da, db) = (a - mp, b - mc);
        spp += da * da;
        scc += db * db;
        spc += da * db;
    }
    let nf = n as f64;
    if scc <= 0.0 {
        return Err(CvaError::Degenerate("control variate has zero sample variance".into()));
    }
    let beta = spc / scc;
    let resid = (spp - 2.0 * beta * spc + beta * beta * scc).max(0.0) / (nf - 1.0);
    let (cv_mean, cv_var) = match control {
        ControlMean::Exact(u) => (u, 0.0),
        ControlMean::Pilot { mean, std_error } => (mean, std_error * std_error),
    };
    let corr = if spp > 0.0 { spc / (spp * scc).sqrt() } else { 0.0 };
    Ok(McEstimate {
        mean: mp - beta * (mc - cv_mean),
        std_error: (resid / nf + beta * beta * cv_var).sqrt(),
        raw_mean: mp,
        raw_std_error: (spp / (nf - 1.0) / nf).sqrt(),
        cv_correlation: corr,
        cv_beta: beta,
        n_paths: n,
        n_steps: paths.n_steps,
        seed: paths.seed,
    })
}

/// Seed of the pilot run, decorrelated from the main seed.
fn pilot_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Simulates and estimates the CVA. The control-variate mean is the pricer
/// value for SABR and Heston and a pilot-run estimate for Hull-White.
pub fn run_mc_cva(
    pairing: &ModelPairing,
    state: &MarketState,
    corr: &CorrelationTriple,
    mc: &McConfig,
    quad: &QuadratureConfig,
) -> Result<McEstimate> {
    let paths = simulate_paths(pairing, state, corr, mc)?;
    let control = match pairing.vol {
        VolModel::HullWhite(_) => {
            let pilot = McConfig {
                n_paths: if mc.pilot_paths == 0 { mc.n_paths } else { mc.pilot_paths },
                seed: pilot_seed(mc.seed),
                ..*mc
            };
            let est = mc_price(&simulate_default_free(&pairing.vol, state, corr.eta, &pilot)?, state.kappa);
            ControlMean::Pilot { mean: est.mean, std_error: est.std_error }
        }
        _ => ControlMean::Exact(price_and_greeks(&pairing.vol, state, corr, quad)?.u),
    };
    let est = mc_cva(&paths, state, control)?;
    if pairing.intensity.kind == IntensityKind::Vasicek && paths.negative_intensity_paths > 0 {
        log::info!(
            "{} of {} Vasicek paths had a negative intensity",
            paths.negative_intensity_paths,
            paths.len()
        );
    }
    if !est.mean.is_finite() {
        return Err(CvaError::Numerical("Monte Carlo estimate is not finite".into()));
    }
    Ok(est)
}

/// Monte Carlo survival probability `E[e^{-int lambda}]` from a batch.
pub fn mc_survival(paths: &PathBatch) -> (f64, f64) {
    let s: Vec<f64> = paths.int_lambda.iter().map(|l| (-l).exp()).collect();
    let m = mean(&s);
    let n = s.len() as f64;
    let var = s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `1 - N^t_t` for comparison with Monte Carlo survival.
pub fn default_probability(p: &IntensityParams, tau: f64) -> Result<f64> {
    Ok(1.0 - survival_factor(p, p.lambda0, tau)?)
}
