//! Run configuration as flat `key=value` text with dotted section keys.
//!
//! Files and command-line overrides feed the same key table; later values
//! replace earlier ones and unknown keys are rejected. [`RunConfig::to_text`]
//! writes every key in canonical order, so `to_text(parse(x))` is the
//! normal form of `x`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::cva::{FormulaOptions, GbmMoments, HwMean};
use crate::error::{CvaError, Result};
use crate::intensity::SqrtDecay;
use crate::montecarlo::McConfig;
use crate::params::{
    builtin_intensity, builtin_model, CorrelationTriple, FittedModel, HestonParams, HullWhiteParams, IntensityKind,
    IntensityParams, MarketState, ModelPairing, ParameterBundle, SabrParams, VolModel,
};
use crate::quadrature::QuadratureConfig;

/// Every accepted key with a one-line description, in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("run.mode", "sweep | sensitivity"),
    ("model.kind", "sabr | hw | heston"),
    ("model.set", "sabr-fit | heston-fit | inline"),
    ("model.eta", "asset/volatility correlation (overrides the set)"),
    ("model.y0", "initial volatility factor (overrides the set)"),
    ("model.gamma", "SABR CEV exponent (overrides the set)"),
    ("model.c", "vol-of-vol (overrides the set)"),
    ("model.b", "Hull-White volatility drift"),
    ("model.k", "Heston mean reversion (overrides the set)"),
    ("model.theta", "Heston long-run variance (overrides the set)"),
    ("intensity.kind", "vasicek | cir"),
    ("intensity.set", "set name (cir-3, or 3) or inline lambda0,q,mu,sigma"),
    ("option.maturity", "maturity T in years"),
    ("option.spot", "spot level S0"),
    ("option.strike", "strike level K (defaults to the fitted strike)"),
    ("sweep.rho_grid", "a:b:step or comma list of asset/intensity correlations"),
    ("sweep.nu", "volatility/intensity correlation"),
    ("sweep.methods", "comma list of mc, first, second"),
    ("sensitivity.param", "mu | sigma"),
    ("sensitivity.values", "a:b:step or comma list of parameter values"),
    ("sensitivity.models", "comma list of models (defaults to model.kind)"),
    ("mc.paths", "Monte Carlo paths"),
    ("mc.steps", "time steps per path"),
    ("mc.seed", "64-bit seed"),
    ("mc.pilot_paths", "pilot paths for the Hull-White control mean (0 = mc.paths)"),
    ("quad.dt", "trapezoid step of the time integrals"),
    ("quad.upper", "truncation of the Fourier integrals"),
    ("quad.nodes", "initial Gauss-Legendre nodes"),
    ("formula.gbm_moments", "martingale | linear"),
    ("formula.sqrt_decay", "ito | quarter"),
    ("formula.hw_mean", "median | martingale"),
    ("output.path", "CSV path (empty = stdout)"),
];

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sweep,
    Sensitivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    Sabr,
    HullWhite,
    Heston,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Mc,
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityParam {
    Mu,
    Sigma,
}

/// Named parameter set or inline `(lambda0, q, mu, sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub enum IntensitySet {
    Named(String),
    Inline([f64; 4]),
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, $($variant:expr => $name:literal),+ $(,)?) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    _ => Err(format!(concat!("expected ", $what, ", got `{}`"), s)),
                }
            }
        }
    };
}

keyword_enum!(Mode, "sweep or sensitivity", Mode::Sweep => "sweep", Mode::Sensitivity => "sensitivity");
keyword_enum!(ModelKind, "sabr, hw or heston",
    ModelKind::Sabr => "sabr", ModelKind::HullWhite => "hw", ModelKind::Heston => "heston");
keyword_enum!(Method, "mc, first or second", Method::Mc => "mc", Method::First => "first", Method::Second => "second");
keyword_enum!(SensitivityParam, "mu or sigma", SensitivityParam::Mu => "mu", SensitivityParam::Sigma => "sigma");
keyword_enum!(GbmMoments, "martingale or linear", GbmMoments::Martingale => "martingale", GbmMoments::Linear => "linear");
keyword_enum!(SqrtDecay, "ito or quarter", SqrtDecay::Ito => "ito", SqrtDecay::Quarter => "quarter");
keyword_enum!(HwMean, "median or martingale", HwMean::Median => "median", HwMean::Martingale => "martingale");

impl fmt::Display for IntensitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntensitySet::Named(n) => f.write_str(n),
            IntensitySet::Inline(v) => f.write_str(&join(v)),
        }
    }
}

/// Optional replacements for the fitted model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelOverrides {
    pub eta: Option<f64>,
    pub y0: Option<f64>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub b: Option<f64>,
    pub k: Option<f64>,
    pub theta: Option<f64>,
}

/// Fully parsed configuration of a sweep or sensitivity run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: ModelKind,
    /// `sabr-fit`, `heston-fit` or `inline`.
    pub model_set: String,
    pub overrides: ModelOverrides,
    pub intensity: IntensityKind,
    pub intensity_set: IntensitySet,
    pub maturity: f64,
    pub spot: f64,
    pub strike: Option<f64>,
    pub rho_grid: Vec<f64>,
    pub nu: f64,
    pub methods: Vec<Method>,
    pub sensitivity_param: SensitivityParam,
    pub sensitivity_values: Vec<f64>,
    pub sensitivity_models: Vec<ModelKind>,
    pub mc: McConfig,
    pub quad: QuadratureConfig,
    pub formula: FormulaOptions,
    pub output: Option<String>,
}

/// Raw key/value pairs, remembering where each value came from.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, (String, String)>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key=value` lines. Blank lines and lines starting with `#`
    /// are skipped; a key may appear once per text.
    pub fn parse_text(text: &str, origin: &str) -> Result<Self> {
        let mut map = Self::new();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("{origin}:{line_no}: expected key=value, got `{line}`")))?;
            let key = key.trim();
            if let Some(first) = seen.insert(key.to_string(), line_no) {
                return Err(config_err(format!(
                    "{origin}:{line_no}: duplicate key `{key}` (first set on line {first})"
                )));
            }
            map.set(key, value.trim(), &format!("{origin}:{line_no}"))?;
        }
        Ok(map)
    }

    /// Sets one key, replacing any earlier value.
    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<()> {
        if !is_known(key) {
            return Err(config_err(format!("{origin}: unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), (value.to_string(), origin.to_string()));
        Ok(())
    }

    /// Applies every entry of `other` on top of `self`.
    pub fn merge(&mut self, other: ConfigMap) {
        self.values.extend(other.values);
    }

    fn raw(&self, key: &str) -> Option<(&str, &str)> {
        self.values
            .get(key)
            .map(|(v, o)| (v.as_str(), o.as_str()))
            .filter(|(v, _)| !v.is_empty())
    }

    fn get<T: FromStr>(&self, key: &str, expected: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| config_err(format!("{origin}: `{key}` expects {expected}, got `{v}`"))),
        }
    }

    fn keyword<T: FromStr<Err = String>>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, origin)) => v.parse::<T>().map(Some).map_err(|e| config_err(format!("{origin}: `{key}`: {e}"))),
        }
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| {
            let help = KEYS.iter().find(|(k, _)| *k == key).map(|(_, h)| *h).unwrap_or("");
            config_err(format!("missing required key `{key}` ({help})"))
        })
    }

    fn grid(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, origin)) => parse_grid(v).map(Some).map_err(|e| config_err(format!("{origin}: `{key}`: {e}"))),
        }
    }

    fn list<T: FromStr<Err = String>>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .split(',')
                .map(|s| s.trim().parse::<T>())
                .collect::<std::result::Result<Vec<T>, String>>()
                .map(Some)
                .map_err(|e| config_err(format!("{origin}: `{key}`: {e}"))),
        }
    }

    fn origin(&self, key: &str) -> String {
        self.values.get(key).map(|(_, o)| o.clone()).unwrap_or_else(|| "default".into())
    }
}

fn config_err(msg: String) -> CvaError {
    CvaError::Config(msg)
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Parses `a:b:step` (inclusive) or a comma-separated list.
pub fn parse_grid(text: &str) -> std::result::Result<Vec<f64>, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("expected a number, got `{}`", s.trim()));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected a:b:step, got `{text}`"));
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || b < a {
            return Err(format!("need a <= b and step > 0 in `{text}`"));
        }
        let n = ((b - a) / step).round();
        if ((a + n * step) - b).abs() > 1e-9 * (1.0 + b.abs()) {
            return Err(format!("step {step} does not divide [{a}, {b}]"));
        }
        // rounding keeps grid points such as 0.1 + 2 * 0.1 at their decimal value
        (0..=n as usize).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12 + 0.0).collect()
    } else {
        text.split(',').map(num).collect::<std::result::Result<Vec<f64>, String>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(format!("empty or non-finite grid `{text}`"));
    }
    Ok(values)
}

/// Accepts `cir-3`, `3` or `lambda0,q,mu,sigma`.
fn parse_intensity_set(text: &str, kind: IntensityKind) -> std::result::Result<IntensitySet, String> {
    if text.contains(',') {
        let v: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("expected a number, got `{}`", s.trim())))
            .collect::<std::result::Result<_, _>>()?;
        let arr: [f64; 4] = v.try_into().map_err(|_| "inline set needs lambda0,q,mu,sigma".to_string())?;
        return Ok(IntensitySet::Inline(arr));
    }
    let name = if text.chars().all(|c| c.is_ascii_digit()) { format!("{kind}-{text}") } else { text.to_string() };
    if !name.starts_with(&format!("{kind}-")) {
        return Err(format!("set `{name}` does not belong to the {kind} intensity"));
    }
    builtin_intensity(&name).map_err(|e| e.to_string())?;
    Ok(IntensitySet::Named(name))
}

impl RunConfig {
    /// Builds a configuration from raw keys, filling documented defaults.
    pub fn from_map(m: &ConfigMap) -> Result<Self> {
        let mode = m.keyword::<Mode>("run.mode")?.unwrap_or(Mode::Sweep);
        let model = m.required("model.kind", m.keyword::<ModelKind>("model.kind")?)?;
        let model_set = match m.raw("model.set") {
            Some((v, _)) => v.to_string(),
            None => default_model_set(model).to_string(),
        };
        let overrides = ModelOverrides {
            eta: m.get("model.eta", "a real")?,
            y0: m.get("model.y0", "a positive real")?,
            gamma: m.get("model.gamma", "a real in (0, 1)")?,
            c: m.get("model.c", "a positive real")?,
            b: m.get("model.b", "a real")?,
            k: m.get("model.k", "a positive real")?,
            theta: m.get("model.theta", "a positive real")?,
        };
        let intensity = m.required("intensity.kind", m.keyword::<IntensityKind>("intensity.kind")?)?;
        let set_text = m.required("intensity.set", m.raw("intensity.set"))?.0;
        let intensity_set = parse_intensity_set(set_text, intensity)
            .map_err(|e| config_err(format!("{}: `intensity.set`: {e}", m.origin("intensity.set"))))?;
        let maturity = m.required("option.maturity", m.get::<f64>("option.maturity", "years")?)?;
        let mc_default = McConfig::default();
        let quad_default = QuadratureConfig::default();
        let cfg = Self {
            mode,
            model,
            model_set,
            overrides,
            intensity,
            intensity_set,
            maturity,
            spot: m.get("option.spot", "a positive real")?.unwrap_or(1.0),
            strike: m.get("option.strike", "a positive real")?,
            rho_grid: m.grid("sweep.rho_grid")?.unwrap_or_else(default_rho_grid),
            nu: m.get("sweep.nu", "a real in (-1, 1)")?.unwrap_or(0.0),
            methods: normalize_methods(m.list::<Method>("sweep.methods")?.unwrap_or_else(default_methods)),
            sensitivity_param: m.keyword("sensitivity.param")?.unwrap_or(SensitivityParam::Mu),
            sensitivity_values: m.grid("sensitivity.values")?.unwrap_or_default(),
            sensitivity_models: m.list::<ModelKind>("sensitivity.models")?.unwrap_or_else(|| vec![model]),
            mc: McConfig {
                n_paths: m.get("mc.paths", "a positive integer")?.unwrap_or(mc_default.n_paths),
                n_steps: m.get("mc.steps", "a positive integer")?.unwrap_or(mc_default.n_steps),
                seed: m.get("mc.seed", "a 64-bit unsigned integer")?.unwrap_or(mc_default.seed),
                pilot_paths: m.get("mc.pilot_paths", "a non-negative integer")?.unwrap_or(0),
            },
            quad: QuadratureConfig {
                dt: m.get("quad.dt", "a positive real")?.unwrap_or(quad_default.dt),
                upper_limit: m.get("quad.upper", "a positive real")?.unwrap_or(quad_default.upper_limit),
                n_nodes: m.get("quad.nodes", "an integer >= 16")?.unwrap_or(quad_default.n_nodes),
            },
            formula: FormulaOptions {
                gbm_moments: m.keyword("formula.gbm_moments")?.unwrap_or_default(),
                sqrt_decay: m.keyword("formula.sqrt_decay")?.unwrap_or_default(),
                hw_mean: m.keyword("formula.hw_mean")?.unwrap_or_default(),
            },
            output: m.raw("output.path").map(|(v, _)| v.to_string()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the cross-key constraints, including correlation
    /// admissibility of every grid point.
    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return Err(config_err(format!("`option.maturity` must be positive, got {}", self.maturity)));
        }
        if self.methods.is_empty() {
            return Err(config_err("`sweep.methods` must name at least one method".into()));
        }
        self.mc.validate().map_err(|e| e.context("mc"))?;
        self.quad.validate().map_err(|e| e.context("quad"))?;
        if self.mode == Mode::Sensitivity {
            if self.sensitivity_values.is_empty() {
                return Err(config_err("sensitivity mode needs `sensitivity.values`".into()));
            }
            if self.methods.contains(&Method::Mc) {
                return Err(config_err("sensitivity mode evaluates formulas only; drop `mc` from `sweep.methods`".into()));
            }
            for &v in &self.sensitivity_values {
                self.intensity_params_with(Some(v)).map_err(|e| e.context("sensitivity.values"))?;
            }
        }
        self.intensity_params()?;
        let models = match self.mode {
            Mode::Sweep => vec![self.model],
            Mode::Sensitivity => self.sensitivity_models.clone(),
        };
        for kind in models {
            let fm = self.fitted_model(kind)?;
            self.market_state(&fm)?;
            for &rho in &self.rho_grid {
                let corr = CorrelationTriple::new(fm.eta, rho, self.nu).map_err(|e| {
                    config_err(format!(
                        "`sweep.rho_grid`: rho = {rho} is not admissible with eta = {}, nu = {}: {e}",
                        fm.eta, self.nu
                    ))
                })?;
                ModelPairing::new(fm.vol, self.intensity_params()?)
                    .check(&corr)
                    .map_err(|e| config_err(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Volatility model of the given kind with overrides applied. Overrides
    /// only apply to the configured `model.kind`.
    pub fn fitted_model(&self, kind: ModelKind) -> Result<FittedModel> {
        let (set, o) = if kind == self.model {
            (self.model_set.as_str(), self.overrides)
        } else {
            (default_model_set(kind), ModelOverrides::default())
        };
        let base = match set {
            "inline" => None,
            name => {
                let fm = builtin_model(name).map_err(|e| config_err(format!("`model.set`: {e}")))?;
                if model_kind(&fm.vol) != kind {
                    return Err(config_err(format!("`model.set`: {name} is not a {kind} set")));
                }
                Some(fm)
            }
        };
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| config_err(format!("`model.set = inline` needs `{key}`")))
        };
        let eta = match (o.eta, base) {
            (Some(e), _) => e,
            (None, Some(b)) => b.eta,
            (None, None) => need(None, "model.eta")?,
        };
        let y0 = match (o.y0, base) {
            (Some(y), _) => y,
            (None, Some(b)) => b.y0,
            (None, None) => need(None, "model.y0")?,
        };
        let strike = base.map(|b| b.strike).unwrap_or(1.0);
        let input = |e: CvaError| config_err(format!("model parameters: {e}"));
        let vol = match (kind, base.map(|b| b.vol)) {
            (ModelKind::Sabr, b) => {
                let (g0, c0) = match b {
                    Some(VolModel::Sabr(s)) => (Some(s.gamma), Some(s.c)),
                    _ => (None, None),
                };
                VolModel::Sabr(
                    SabrParams::new(need(o.gamma.or(g0), "model.gamma")?, need(o.c.or(c0), "model.c")?)
                        .map_err(input)?,
                )
            }
            (ModelKind::Heston, b) => {
                let (k0, t0, c0) = match b {
                    Some(VolModel::Heston(h)) => (Some(h.k), Some(h.theta), Some(h.c)),
                    _ => (None, None, None),
                };
                VolModel::Heston(
                    HestonParams::new(
                        need(o.k.or(k0), "model.k")?,
                        need(o.theta.or(t0), "model.theta")?,
                        need(o.c.or(c0), "model.c")?,
                    )
                    .map_err(input)?,
                )
            }
            (ModelKind::HullWhite, _) => VolModel::HullWhite(
                HullWhiteParams::new(o.b.unwrap_or(0.0), need(o.c, "model.c")?).map_err(input)?,
            ),
        };
        Ok(FittedModel { vol, eta, y0, strike })
    }

    pub fn intensity_params(&self) -> Result<IntensityParams> {
        self.intensity_params_with(None)
    }

    /// Intensity parameters, with the sensitivity parameter replaced by
    /// `value` when given.
    pub fn intensity_params_with(&self, value: Option<f64>) -> Result<IntensityParams> {
        let p = match &self.intensity_set {
            IntensitySet::Named(n) => builtin_intensity(n)?,
            IntensitySet::Inline([l, q, mu, s]) => IntensityParams::new(self.intensity, *l, *q, *mu, *s)
                .map_err(|e| config_err(format!("`intensity.set`: {e}")))?,
        };
        match value {
            None => Ok(p),
            Some(v) => {
                let (mu, sigma) = match self.sensitivity_param {
                    SensitivityParam::Mu => (v, p.sigma),
                    SensitivityParam::Sigma => (p.mu, v),
                };
                IntensityParams::new(p.kind, p.lambda0, p.q, mu, sigma).map_err(|e| config_err(e.to_string()))
            }
        }
    }

    pub fn market_state(&self, fm: &FittedModel) -> Result<MarketState> {
        let strike = self.strike.unwrap_or(fm.strike);
        MarketState::from_levels(self.spot, strike, fm.y0, self.maturity)
            .map_err(|e| config_err(format!("option: {e}")))
    }

    /// Feller violations of the configured models and intensities.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let models = match self.mode {
            Mode::Sweep => vec![self.model],
            Mode::Sensitivity => self.sensitivity_models.clone(),
        };
        for kind in models {
            if let Ok(fm) = self.fitted_model(kind) {
                out.extend(ParameterBundle::Model(fm).warnings().into_iter().map(|w| format!("{kind}: {w}")));
            }
        }
        let mut intensities = vec![self.intensity_params()];
        if self.mode == Mode::Sensitivity {
            intensities.extend(self.sensitivity_values.iter().map(|&v| self.intensity_params_with(Some(v))));
        }
        for p in intensities.into_iter().flatten() {
            for w in ParameterBundle::Intensity(p).warnings() {
                let w = format!("intensity (mu = {}, sigma = {}): {w}", p.mu, p.sigma);
                if !out.contains(&w) {
                    out.push(w);
                }
            }
        }
        out
    }

    /// Canonical text with every key, one per line.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Canonical `(key, value)` pairs in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let o = &self.overrides;
        let values: Vec<String> = vec![
            self.mode.to_string(),
            self.model.to_string(),
            self.model_set.clone(),
            fmt_opt(o.eta),
            fmt_opt(o.y0),
            fmt_opt(o.gamma),
            fmt_opt(o.c),
            fmt_opt(o.b),
            fmt_opt(o.k),
            fmt_opt(o.theta),
            self.intensity.to_string(),
            self.intensity_set.to_string(),
            self.maturity.to_string(),
            self.spot.to_string(),
            fmt_opt(self.strike),
            join(&self.rho_grid),
            self.nu.to_string(),
            join(&self.methods),
            self.sensitivity_param.to_string(),
            join(&self.sensitivity_values),
            join(&self.sensitivity_models),
            self.mc.n_paths.to_string(),
            self.mc.n_steps.to_string(),
            self.mc.seed.to_string(),
            self.mc.pilot_paths.to_string(),
            self.quad.dt.to_string(),
            self.quad.upper_limit.to_string(),
            self.quad.n_nodes.to_string(),
            self.formula.gbm_moments.to_string(),
            self.formula.sqrt_decay.to_string(),
            self.formula.hw_mean.to_string(),
            self.output.clone().unwrap_or_default(),
        ];
        KEYS.iter().map(|(k, _)| *k).zip(values).collect()
    }
}

impl FromStr for IntensityKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "vasicek" => Ok(IntensityKind::Vasicek),
            "cir" => Ok(IntensityKind::Cir),
            _ => Err(format!("expected vasicek or cir, got `{s}`")),
        }
    }
}

fn model_kind(vol: &VolModel) -> ModelKind {
    match vol {
        VolModel::Sabr(_) => ModelKind::Sabr,
        VolModel::HullWhite(_) => ModelKind::HullWhite,
        VolModel::Heston(_) => ModelKind::Heston,
    }
}

fn default_model_set(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Sabr => "sabr-fit",
        ModelKind::Heston => "heston-fit",
        ModelKind::HullWhite => "inline",
    }
}

fn default_rho_grid() -> Vec<f64> {
    vec![-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75]
}

fn default_methods() -> Vec<Method> {
    vec![Method::Mc, Method::First, Method::Second]
}

fn normalize_methods(mut m: Vec<Method>) -> Vec<Method> {
    m.sort();
    m.dedup();
    m
}

/// Parses a config file (if any) and applies `overrides` on top.
pub fn parse_config(text: Option<&str>, overrides: &[(String, String)]) -> Result<RunConfig> {
    parse_config_from(text, "config", overrides)
}

/// As [`parse_config`], with `origin` (usually the file name) in diagnostics.
pub fn parse_config_from(text: Option<&str>, origin: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut map = match text {
        Some(t) => ConfigMap::parse_text(t, origin)?,
        None => ConfigMap::new(),
    };
    for (k, v) in overrides {
        map.set(k, v, "command line")?;
    }
    RunConfig::from_map(&map)
}

/// Canonical form of a config text.
pub fn normalize(text: &str) -> Result<String> {
    Ok(parse_config(Some(text), &[])?.to_text())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minimal() -> Vec<(String, String)> {
        [("model.kind", "heston"), ("intensity.kind", "cir"), ("intensity.set", "3"), ("option.maturity", "0.5")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn minimal_flags_fill_defaults() {
        let c = parse_config(None, &minimal()).unwrap();
        assert_eq!(c.mode, Mode::Sweep);
        assert_eq!(c.model_set, "heston-fit");
        assert_eq!(c.intensity_set, IntensitySet::Named("cir-3".into()));
        assert_eq!(c.rho_grid, default_rho_grid());
        assert_eq!(c.methods, vec![Method::Mc, Method::First, Method::Second]);
        assert_eq!(c.mc, McConfig::default());
        assert_eq!(c.quad, QuadratureConfig::default());
        assert_eq!(c.nu, 0.0);
        let fm = c.fitted_model(ModelKind::Heston).unwrap();
        assert_eq!(c.market_state(&fm).unwrap().kappa, 1.15f64.ln());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ConfigMap::parse_text("model.kind=sabr\nmc.path=10\n", "f.cfg").unwrap_err();
        assert_eq!(err, CvaError::Config("f.cfg:2: unknown key `mc.path`".into()));
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = ConfigMap::parse_text("mc.paths=1\n\nmc.paths=2\n", "f").unwrap_err();
        assert!(err.to_string().contains("f:3: duplicate key `mc.paths` (first set on line 1)"));
    }

    #[test]
    fn type_errors_name_key_and_type() {
        let mut o = minimal();
        o.push(("mc.paths".into(), "many".into()));
        let err = parse_config(None, &o).unwrap_err().to_string();
        assert!(err.contains("`mc.paths` expects a positive integer, got `many`"), "{err}");
    }

    #[test]
    fn missing_key_named() {
        let err = parse_config(None, &minimal()[..3]).unwrap_err().to_string();
        assert!(err.contains("missing required key `option.maturity`"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let text = "model.kind=sabr\nintensity.kind=cir\nintensity.set=cir-1\noption.maturity=1\nmc.paths=1000\n";
        let c = parse_config(Some(text), &[("mc.paths".into(), "500".into())]).unwrap();
        assert_eq!(c.mc.n_paths, 500);
        let err = parse_config(Some(text), &[("mc.pathz".into(), "5".into())]).unwrap_err();
        assert!(err.to_string().contains("unknown key `mc.pathz`"));
    }

    #[test]
    fn inadmissible_rho_names_inequality() {
        let mut o = minimal();
        o.push(("sweep.rho_grid".into(), "0.5,0.99".into()));
        o.push(("sweep.nu".into(), "0.3".into()));
        let err = parse_config(None, &o).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, CvaError::Config(_)));
        assert!(msg.contains("rho = 0.99"), "{msg}");
        assert!(msg.contains("nu^2 + rho^2 + eta^2 < 1 + 2*nu*eta*rho"), "{msg}");
    }

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("-0.75:0.75:0.25").unwrap(), default_rho_grid());
        assert_eq!(parse_grid("0.02:0.2:0.02").unwrap().len(), 10);
        assert_eq!(parse_grid("0.02:0.2:0.02").unwrap()[2], 0.06);
        assert_eq!(parse_grid("0.1, -0.2").unwrap(), vec![0.1, -0.2]);
        assert!(parse_grid("-0.9:0.9:0.3").unwrap()[3].is_sign_positive());
        assert!(parse_grid("0:1:0.3").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn intensity_set_forms() {
        let mut o = minimal();
        o[2].1 = "0.02,0.5,0.05,0.1".into();
        let c = parse_config(None, &o).unwrap();
        assert_eq!(c.intensity_params().unwrap(), IntensityParams::cir(0.02, 0.5, 0.05, 0.1).unwrap());
        o[2].1 = "vasicek-1".into();
        assert!(parse_config(None, &o).unwrap_err().to_string().contains("does not belong"));
        o[2].1 = "7".into();
        assert!(parse_config(None, &o).is_err());
    }

    #[test]
    fn hull_white_needs_inline_parameters() {
        let mut o = minimal();
        o[0].1 = "hw".into();
        let err = parse_config(None, &o).unwrap_err().to_string();
        assert!(err.contains("needs `model.eta`"), "{err}");
        for (k, v) in [("model.eta", "-0.3"), ("model.y0", "0.2"), ("model.c", "0.3")] {
            o.push((k.into(), v.into()));
        }
        let c = parse_config(None, &o).unwrap();
        assert_eq!(c.fitted_model(ModelKind::HullWhite).unwrap().strike, 1.0);
        o.push(("model.eta".into(), "0.2".into()));
        assert!(parse_config(None, &o).unwrap_err().to_string().contains("eta <= 0"));
    }

    #[test]
    fn sensitivity_rejects_mc() {
        let mut o = minimal();
        o.push(("run.mode".into(), "sensitivity".into()));
        o.push(("sensitivity.values".into(), "0.02:0.2:0.02".into()));
        assert!(parse_config(None, &o).unwrap_err().to_string().contains("drop `mc`"));
        o.push(("sweep.methods".into(), "first".into()));
        let c = parse_config(None, &o).unwrap();
        assert_eq!(c.intensity_params_with(Some(0.1)).unwrap().mu, 0.1);
    }

    #[test]
    fn normal_form_is_stable() {
        let text = "# comment\n  model.kind = sabr \nintensity.kind=vasicek\nintensity.set=1\noption.maturity=1\nsweep.methods=second,first,first\n";
        let n = normalize(text).unwrap();
        assert!(n.contains("intensity.set=vasicek-1\n"));
        assert!(n.contains("sweep.methods=first,second\n"));
        assert_eq!(n.lines().count(), KEYS.len());
        assert_eq!(normalize(&n).unwrap(), n);
    }

    fn arb_config() -> impl Strategy<Value = Vec<(String, String)>> {
        (
            prop::sample::select(vec!["sabr", "heston"]),
            prop::sample::select(vec!["cir-1", "cir-2", "cir-3", "cir-4", "vasicek-1", "vasicek-2"]),
            0.1f64..2.0,
            prop::collection::vec(-0.9f64..0.9, 1..5),
            -0.3f64..0.3,
            1usize..1_000_000,
            any::<u64>(),
            prop::sample::subsequence(vec!["mc", "first", "second"], 1..=3),
        )
            .prop_map(|(model, set, t, rho, nu, paths, seed, methods)| {
                let kind = set.split('-').next().unwrap();
                let rho: Vec<String> = rho.iter().map(|r| r.to_string()).collect();
                [
                    ("model.kind", model.to_string()),
                    ("intensity.kind", kind.to_string()),
                    ("intensity.set", set.to_string()),
                    ("option.maturity", t.to_string()),
                    ("sweep.rho_grid", rho.join(",")),
                    ("sweep.nu", nu.to_string()),
                    ("mc.paths", paths.to_string()),
                    ("mc.seed", seed.to_string()),
                    ("sweep.methods", methods.join(",")),
                ]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect()
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(pairs in arb_config()) {
            let text: String = pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
            match parse_config(Some(&text), &[]) {
                Ok(c) => {
                    let n = c.to_text();
                    prop_assert_eq!(&parse_config(Some(&n), &[]).unwrap(), &c);
                    prop_assert_eq!(normalize(&n).unwrap(), n);
                }
                // random correlation triples may be inadmissible
                Err(e) => prop_assert!(e.to_string().contains("not admissible"), "{}", e),
            }
        }
    }
}
