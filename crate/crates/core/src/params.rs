//! Parameter containers for the volatility and intensity models, the
//! correlation structure linking their drivers, and the built-in parameter
//! sets used by the experiments.

use std::fmt;

use crate::error::{CvaError, Result};

/// Correlations among the asset driver `B1`, the volatility driver `B2` and
/// the intensity driver `B3`.
///
/// `eta = <B1, B2>`, `rho = <B1, B3>`, `nu = <B2, B3>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationTriple {
    pub eta: f64,
    pub rho: f64,
    pub nu: f64,
}

impl CorrelationTriple {
    /// Builds a triple after checking that the implied 3x3 correlation
    /// matrix is positive definite.
    pub fn new(eta: f64, rho: f64, nu: f64) -> Result<Self> {
        let triple = Self { eta, rho, nu };
        validate_correlations(&triple)?;
        Ok(triple)
    }

    /// Independent drivers.
    pub fn zero() -> Self {
        Self { eta: 0.0, rho: 0.0, nu: 0.0 }
    }

    /// Loading of `B3` on the asset-specific driver `Z`.
    pub fn alpha(&self) -> f64 {
        (self.rho - self.eta * self.nu) / (1.0 - self.eta * self.eta).sqrt()
    }

    /// Loading of `B3` on its idiosyncratic driver `U`.
    pub fn beta(&self) -> f64 {
        let num = 1.0 - (self.eta * self.eta + self.nu * self.nu + self.rho * self.rho)
            + 2.0 * self.nu * self.eta * self.rho;
        (num / (1.0 - self.eta * self.eta)).max(0.0).sqrt()
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new(self.eta, rho, self.nu)
    }

    /// The correlation matrix of `(B1, B2, B3)`.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [
            [1.0, self.eta, self.rho],
            [self.eta, 1.0, self.nu],
            [self.rho, self.nu, 1.0],
        ]
    }
}

/// Checks the admissibility of a correlation triple and returns the loadings
/// `(alpha, beta)` of the intensity driver on the independent factors.
pub fn validate_correlations(triple: &CorrelationTriple) -> Result<(f64, f64)> {
    let CorrelationTriple { eta, rho, nu } = *triple;
    for (name, v) in [("eta", eta), ("rho", rho), ("nu", nu)] {
        if !v.is_finite() || v * v >= 1.0 {
            return Err(CorrelationDomainViolation::Bound(name, v).into());
        }
    }
    let lhs = nu * nu + rho * rho + eta * eta;
    let rhs = 1.0 + 2.0 * nu * eta * rho;
    if lhs >= rhs {
        return Err(CorrelationDomainViolation::Definiteness { eta, rho, nu, lhs, rhs }.into());
    }
    Ok((triple.alpha(), triple.beta()))
}

enum CorrelationDomainViolation {
    Bound(&'static str, f64),
    Definiteness { eta: f64, rho: f64, nu: f64, lhs: f64, rhs: f64 },
}

impl From<CorrelationDomainViolation> for CvaError {
    fn from(v: CorrelationDomainViolation) -> Self {
        let msg = match v {
            CorrelationDomainViolation::Bound(name, value) => {
                format!("{name}^2 < 1 fails for {name} = {value}")
            }
            CorrelationDomainViolation::Definiteness { eta, rho, nu, lhs, rhs } => format!(
                "nu^2 + rho^2 + eta^2 < 1 + 2*nu*eta*rho fails: {lhs} >= {rhs} \
                 (eta = {eta}, rho = {rho}, nu = {nu})"
            ),
        };
        CvaError::CorrelationDomain(msg)
    }
}

/// SABR volatility: `dY = c Y dB2`, asset diffusion `Y e^{-(1-gamma) X}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SabrParams {
    pub gamma: f64,
    pub c: f64,
}

impl SabrParams {
    pub fn new(gamma: f64, c: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(CvaError::InvalidParameter(format!(
                "SABR gamma must lie in (0, 1), got {gamma}"
            )));
        }
        if !(c > 0.0) {
            return Err(CvaError::InvalidParameter(format!("SABR c must be positive, got {c}")));
        }
        Ok(Self { gamma, c })
    }
}

/// Hull-White volatility with constant coefficients: `dY = b Y ds + c Y dB2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullWhiteParams {
    pub b: f64,
    pub c: f64,
}

impl HullWhiteParams {
    pub fn new(b: f64, c: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(CvaError::InvalidParameter(format!("Hull-White b must be finite, got {b}")));
        }
        if !(c > 0.0) {
            return Err(CvaError::InvalidParameter(format!(
                "Hull-White c must be positive, got {c}"
            )));
        }
        Ok(Self { b, c })
    }
}

/// Heston variance: `dY = k (theta - Y) ds + c sqrt(Y) dB2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub k: f64,
    pub theta: f64,
    pub c: f64,
}

impl HestonParams {
    pub fn new(k: f64, theta: f64, c: f64) -> Result<Self> {
        for (name, v) in [("k", k), ("theta", theta), ("c", c)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CvaError::InvalidParameter(format!(
                    "Heston {name} must be positive, got {v}"
                )));
            }
        }
        let p = Self { k, theta, c };
        if !p.feller_ok() {
            log::debug!("Heston parameters violate Feller: c^2 = {} >= 2 k theta = {}", c * c, 2.0 * k * theta);
        }
        Ok(p)
    }

    pub fn feller_ok(&self) -> bool {
        self.c * self.c < 2.0 * self.k * self.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntensityKind {
    Vasicek,
    Cir,
}

impl fmt::Display for IntensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntensityKind::Vasicek => f.write_str("vasicek"),
            IntensityKind::Cir => f.write_str("cir"),
        }
    }
}

/// Default intensity `d lambda = q (mu - lambda) ds + sigma lambda^{i/2} dB3`
/// with `i = 0` (Vasicek) or `i = 1` (CIR).
///
/// `mu` and `sigma` may be zero, which gives a deterministic intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityParams {
    pub kind: IntensityKind,
    pub lambda0: f64,
    pub q: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl IntensityParams {
    pub fn new(kind: IntensityKind, lambda0: f64, q: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(CvaError::InvalidParameter(format!("intensity q must be positive, got {q}")));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(CvaError::InvalidParameter(format!(
                "intensity mu must be non-negative, got {mu}"
            )));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(CvaError::InvalidParameter(format!(
                "intensity sigma must be non-negative, got {sigma}"
            )));
        }
        if !lambda0.is_finite() || (kind == IntensityKind::Cir && lambda0 < 0.0) {
            return Err(CvaError::InvalidParameter(format!(
                "CIR initial intensity must be non-negative, got {lambda0}"
            )));
        }
        let p = Self { kind, lambda0, q, mu, sigma };
        if !p.feller_ok() {
            log::debug!(
                "CIR intensity violates Feller: sigma^2 = {} >= 2 q mu = {}",
                sigma * sigma,
                2.0 * q * mu
            );
        }
        Ok(p)
    }

    pub fn vasicek(lambda0: f64, q: f64, mu: f64, sigma: f64) -> Result<Self> {
        Self::new(IntensityKind::Vasicek, lambda0, q, mu, sigma)
    }

    pub fn cir(lambda0: f64, q: f64, mu: f64, sigma: f64) -> Result<Self> {
        Self::new(IntensityKind::Cir, lambda0, q, mu, sigma)
    }

    /// Always true for Vasicek.
    pub fn feller_ok(&self) -> bool {
        match self.kind {
            IntensityKind::Vasicek => true,
            IntensityKind::Cir => self.sigma * self.sigma < 2.0 * self.q * self.mu,
        }
    }
}

/// Evaluation point: time `t`, maturity `T`, log-price `x`, volatility
/// factor `y` and log-strike `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    pub t: f64,
    pub maturity: f64,
    pub x: f64,
    pub y: f64,
    pub kappa: f64,
}

impl MarketState {
    pub fn new(t: f64, maturity: f64, x: f64, y: f64, kappa: f64) -> Result<Self> {
        if !(t >= 0.0 && t < maturity) || !maturity.is_finite() {
            return Err(CvaError::InvalidParameter(format!(
                "need 0 <= t < T, got t = {t}, T = {maturity}"
            )));
        }
        if !(y > 0.0) || !y.is_finite() {
            return Err(CvaError::InvalidParameter(format!(
                "volatility factor must be positive, got {y}"
            )));
        }
        if !x.is_finite() || !kappa.is_finite() {
            return Err(CvaError::InvalidParameter("log-price and log-strike must be finite".into()));
        }
        Ok(Self { t, maturity, x, y, kappa })
    }

    /// State at `t = 0` from spot and strike levels.
    pub fn from_levels(spot: f64, strike: f64, y: f64, maturity: f64) -> Result<Self> {
        if !(spot > 0.0 && strike > 0.0) {
            return Err(CvaError::InvalidParameter(format!(
                "spot and strike must be positive, got {spot}, {strike}"
            )));
        }
        Self::new(0.0, maturity, spot.ln(), y, strike.ln())
    }

    /// Time to maturity.
    pub fn tau(&self) -> f64 {
        self.maturity - self.t
    }

    pub fn with_x(&self, x: f64) -> Self {
        Self { x, ..*self }
    }

    pub fn with_y(&self, y: f64) -> Self {
        Self { y, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolModel {
    Sabr(SabrParams),
    HullWhite(HullWhiteParams),
    Heston(HestonParams),
}

impl VolModel {
    pub fn name(&self) -> &'static str {
        match self {
            VolModel::Sabr(_) => "sabr",
            VolModel::HullWhite(_) => "hw",
            VolModel::Heston(_) => "heston",
        }
    }

    /// CEV exponent of the asset diffusion.
    pub fn gamma(&self) -> f64 {
        match self {
            VolModel::Sabr(p) => p.gamma,
            _ => 1.0,
        }
    }
}

/// One of the six volatility/intensity combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairingKind {
    SabrVasicek,
    SabrCir,
    HullWhiteVasicek,
    HullWhiteCir,
    HestonVasicek,
    HestonCir,
}

impl fmt::Display for PairingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PairingKind::SabrVasicek => "sabr-vasicek",
            PairingKind::SabrCir => "sabr-cir",
            PairingKind::HullWhiteVasicek => "hw-vasicek",
            PairingKind::HullWhiteCir => "hw-cir",
            PairingKind::HestonVasicek => "heston-vasicek",
            PairingKind::HestonCir => "heston-cir",
        };
        f.write_str(s)
    }
}

/// A volatility model coupled with a default-intensity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPairing {
    pub vol: VolModel,
    pub intensity: IntensityParams,
}

impl ModelPairing {
    pub fn new(vol: VolModel, intensity: IntensityParams) -> Self {
        Self { vol, intensity }
    }

    pub fn kind(&self) -> PairingKind {
        use IntensityKind::*;
        match (&self.vol, self.intensity.kind) {
            (VolModel::Sabr(_), Vasicek) => PairingKind::SabrVasicek,
            (VolModel::Sabr(_), Cir) => PairingKind::SabrCir,
            (VolModel::HullWhite(_), Vasicek) => PairingKind::HullWhiteVasicek,
            (VolModel::HullWhite(_), Cir) => PairingKind::HullWhiteCir,
            (VolModel::Heston(_), Vasicek) => PairingKind::HestonVasicek,
            (VolModel::Heston(_), Cir) => PairingKind::HestonCir,
        }
    }

    /// Pairing-level constraints that involve the correlations.
    pub fn check(&self, corr: &CorrelationTriple) -> Result<()> {
        if let VolModel::HullWhite(_) = self.vol {
            if corr.eta > 0.0 {
                return Err(CvaError::Pairing(format!(
                    "Hull-White requires eta <= 0 for the asset to be a martingale, got {}",
                    corr.eta
                )));
            }
        }
        Ok(())
    }
}

/// Fitted volatility-model parameters together with the state they were
/// fitted at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedModel {
    pub vol: VolModel,
    pub eta: f64,
    pub y0: f64,
    pub strike: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParameterBundle {
    Intensity(IntensityParams),
    Model(FittedModel),
}

impl ParameterBundle {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            ParameterBundle::Intensity(p) if !p.feller_ok() => out.push(format!(
                "Feller condition violated: sigma^2 = {:.4} >= 2 q mu = {:.4}",
                p.sigma * p.sigma,
                2.0 * p.q * p.mu
            )),
            ParameterBundle::Model(FittedModel { vol: VolModel::Heston(h), .. }) if !h.feller_ok() => {
                out.push(format!(
                    "Feller condition violated: c^2 = {:.4} >= 2 k theta = {:.4}",
                    h.c * h.c,
                    2.0 * h.k * h.theta
                ))
            }
            _ => {}
        }
        out
    }

    pub fn intensity(&self) -> Option<IntensityParams> {
        match self {
            ParameterBundle::Intensity(p) => Some(*p),
            _ => None,
        }
    }

    pub fn model(&self) -> Option<FittedModel> {
        match self {
            ParameterBundle::Model(m) => Some(*m),
            _ => None,
        }
    }
}

/// Names accepted by [`builtin_parameter_set`].
pub const BUILTIN_SET_NAMES: [&str; 8] =
    ["vasicek-1", "vasicek-2", "cir-1", "cir-2", "cir-3", "cir-4", "heston-fit", "sabr-fit"];

/// Heston mean reversion used with `heston-fit`; the fitted set does not
/// pin it down.
pub const DEFAULT_HESTON_K: f64 = 1.0;

/// Looks up one of the built-in parameter sets.
pub fn builtin_parameter_set(name: &str) -> Result<ParameterBundle> {
    let bundle = match name {
        "vasicek-1" => ParameterBundle::Intensity(IntensityParams::vasicek(0.09, 0.3, 0.4, 0.1)?),
        "vasicek-2" => ParameterBundle::Intensity(IntensityParams::vasicek(0.1, 0.18, 0.1, 0.015)?),
        "cir-1" => ParameterBundle::Intensity(IntensityParams::cir(0.03, 0.02, 0.161, 0.08)?),
        "cir-2" => ParameterBundle::Intensity(IntensityParams::cir(0.05, 0.09, 0.2, 0.1)?),
        "cir-3" => ParameterBundle::Intensity(IntensityParams::cir(0.01, 0.8, 0.02, 0.2)?),
        "cir-4" => ParameterBundle::Intensity(IntensityParams::cir(0.03, 0.5, 0.05, 0.5)?),
        "heston-fit" => ParameterBundle::Model(FittedModel {
            vol: VolModel::Heston(HestonParams::new(DEFAULT_HESTON_K, 0.04, 0.39)?),
            eta: -0.34,
            y0: 0.034,
            strike: 1.15,
        }),
        "sabr-fit" => ParameterBundle::Model(FittedModel {
            vol: VolModel::Sabr(SabrParams::new(0.7367, 0.7356)?),
            eta: -0.3,
            y0: 0.5887,
            strike: 1.15,
        }),
        other => return Err(CvaError::UnknownSet(other.to_string())),
    };
    for w in bundle.warnings() {
        log::debug!("parameter set {name}: {w}");
    }
    Ok(bundle)
}

/// Convenience wrapper for the intensity sets.
pub fn builtin_intensity(name: &str) -> Result<IntensityParams> {
    builtin_parameter_set(name)?
        .intensity()
        .ok_or_else(|| CvaError::UnknownSet(format!("{name} is not an intensity set")))
}

/// Convenience wrapper for the fitted volatility models.
pub fn builtin_model(name: &str) -> Result<FittedModel> {
    builtin_parameter_set(name)?
        .model()
        .ok_or_else(|| CvaError::UnknownSet(format!("{name} is not a volatility model set")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_correlations() {
        let (a, b) = validate_correlations(&CorrelationTriple::zero()).unwrap();
        assert_eq!(a, 0.0);
        assert_eq!(b, 1.0);
    }

    #[test]
    fn heston_fit_correlations() {
        let tr = CorrelationTriple::new(-0.34, 0.5, 0.0).unwrap();
        let (a, b) = validate_correlations(&tr).unwrap();
        let a_ref = 0.5 / (1.0 - 0.34f64 * 0.34).sqrt();
        let b_ref = (1.0 - a_ref * a_ref).sqrt();
        assert!((a - a_ref).abs() < 1e-15);
        assert!((b - b_ref).abs() < 1e-15);
        assert!((a * a + b * b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        // 3 * 0.81 = 2.43 against 1 + 2 * (-0.729) = -0.458
        let err = CorrelationTriple::new(0.9, 0.9, -0.9).unwrap_err();
        match err {
            CvaError::CorrelationDomain(msg) => assert!(msg.contains("1 + 2*nu*eta*rho")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unit_correlation() {
        let err = CorrelationTriple::new(0.0, 1.0, 0.0).unwrap_err();
        match err {
            CvaError::CorrelationDomain(msg) => assert!(msg.contains("rho^2 < 1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn builtin_values() {
        let cir3 = builtin_intensity("cir-3").unwrap();
        assert_eq!((cir3.lambda0, cir3.q, cir3.mu, cir3.sigma), (0.01, 0.8, 0.02, 0.2));
        assert_eq!(cir3.kind, IntensityKind::Cir);
        let v1 = builtin_intensity("vasicek-1").unwrap();
        assert_eq!((v1.lambda0, v1.q, v1.mu, v1.sigma), (0.09, 0.3, 0.4, 0.1));
        let h = builtin_model("heston-fit").unwrap();
        match h.vol {
            VolModel::Heston(p) => assert_eq!((p.theta, p.c), (0.04, 0.39)),
            _ => panic!(),
        }
        assert_eq!((h.eta, h.y0, h.strike), (-0.34, 0.034, 1.15));
        let s = builtin_model("sabr-fit").unwrap();
        match s.vol {
            VolModel::Sabr(p) => assert_eq!((p.gamma, p.c), (0.7367, 0.7356)),
            _ => panic!(),
        }
        assert_eq!((s.eta, s.y0), (-0.3, 0.5887));
    }

    #[test]
    fn all_builtins_load() {
        for name in BUILTIN_SET_NAMES {
            let b = builtin_parameter_set(name).unwrap();
            if name == "cir-4" {
                assert!(!b.intensity().unwrap().feller_ok());
                assert_eq!(b.warnings().len(), 1);
            }
        }
        assert!(matches!(builtin_parameter_set("cir-9"), Err(CvaError::UnknownSet(_))));
    }

    #[test]
    fn market_state_validation() {
        assert!(MarketState::new(0.5, 0.5, 0.0, 0.1, 0.0).is_err());
        assert!(MarketState::new(0.0, 0.5, 0.0, 0.0, 0.0).is_err());
        let s = MarketState::from_levels(1.0, 1.15, 0.2, 0.5).unwrap();
        assert!((s.kappa - 1.15f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn hull_white_needs_nonpositive_eta() {
        let p = ModelPairing::new(
            VolModel::HullWhite(HullWhiteParams::new(0.0, 0.3).unwrap()),
            builtin_intensity("vasicek-1").unwrap(),
        );
        assert!(p.check(&CorrelationTriple::new(0.2, 0.0, 0.0).unwrap()).is_err());
        assert!(p.check(&CorrelationTriple::new(-0.2, 0.0, 0.0).unwrap()).is_ok());
    }

    fn symmetric_eigenvalues(m: [[f64; 3]; 3]) -> [f64; 3] {
        // Jacobi rotations
        let mut a = m;
        for _ in 0..100 {
            let (mut p, mut q, mut max) = (0, 1, 0.0);
            for i in 0..3 {
                for j in (i + 1)..3 {
                    if a[i][j].abs() > max {
                        max = a[i][j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if max < 1e-15 {
                break;
            }
            let theta = 0.5 * (2.0 * a[p][q]).atan2(a[q][q] - a[p][p]);
            let (s, c) = theta.sin_cos();
            let mut b = a;
            for k in 0..3 {
                b[k][p] = c * a[k][p] - s * a[k][q];
                b[k][q] = s * a[k][p] + c * a[k][q];
            }
            let b2 = b;
            for k in 0..3 {
                b[p][k] = c * b2[p][k] - s * b2[q][k];
                b[q][k] = s * b2[p][k] + c * b2[q][k];
            }
            a = b;
        }
        [a[0][0], a[1][1], a[2][2]]
    }

    proptest! {
        #[test]
        fn admissible_triples_are_positive_definite(
            eta in -0.99f64..0.99, rho in -0.99f64..0.99, nu in -0.99f64..0.99
        ) {
            let tr = CorrelationTriple { eta, rho, nu };
            if let Ok((alpha, beta)) = validate_correlations(&tr) {
                for ev in symmetric_eigenvalues(tr.matrix()) {
                    prop_assert!(ev > -1e-12);
                }
                prop_assert!((nu * nu + alpha * alpha + beta * beta - 1.0).abs() < 1e-12);
                let rho_back = alpha * (1.0 - eta * eta).sqrt() + eta * nu;
                prop_assert!((rho_back - rho).abs() < 1e-12);
            }
        }
    }
}
