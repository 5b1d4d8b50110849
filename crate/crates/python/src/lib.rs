//! Python bindings: parameter sets, pricers, CVA formulas, Monte Carlo and
//! config-driven runs.

use cva_core::config::parse_config;
use cva_core::cva::{cva_first_order, cva_second_order, CvaResult};
use cva_core::intensity::survival_factor;
use cva_core::montecarlo::{run_mc_cva, McConfig, McEstimate};
use cva_core::params::{
    builtin_intensity, builtin_model, CorrelationTriple, FittedModel, HestonParams, HullWhiteParams, IntensityParams,
    MarketState, ModelPairing, SabrParams, VolModel,
};
use cva_core::pricers::price_and_greeks;
use cva_core::quadrature::QuadratureConfig;
use cva_core::{sweep, CvaError};
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(cva_py, InputError, PyValueError);
create_exception!(cva_py, NumericalError, PyArithmeticError);

fn py_err(e: CvaError) -> PyErr {
    if e.is_input_error() {
        InputError::new_err(e.to_string())
    } else {
        NumericalError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for cva_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Vasicek or CIR default intensity.
#[pyclass(frozen, name = "Intensity")]
struct PyIntensity {
    inner: IntensityParams,
}

#[pymethods]
impl PyIntensity {
    #[staticmethod]
    fn vasicek(lambda0: f64, q: f64, mu: f64, sigma: f64) -> PyResult<Self> {
        Ok(Self { inner: IntensityParams::vasicek(lambda0, q, mu, sigma).py()? })
    }

    #[staticmethod]
    fn cir(lambda0: f64, q: f64, mu: f64, sigma: f64) -> PyResult<Self> {
        Ok(Self { inner: IntensityParams::cir(lambda0, q, mu, sigma).py()? })
    }

    /// One of vasicek-1, vasicek-2, cir-1 .. cir-4.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(Self { inner: builtin_intensity(name).py()? })
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind.to_string()
    }
    #[getter]
    fn lambda0(&self) -> f64 {
        self.inner.lambda0
    }
    #[getter]
    fn q(&self) -> f64 {
        self.inner.q
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    fn feller_ok(&self) -> bool {
        self.inner.feller_ok()
    }

    /// `E[exp(-int_0^tau lambda)]` from the current intensity level.
    fn survival(&self, tau: f64) -> PyResult<f64> {
        survival_factor(&self.inner, self.inner.lambda0, tau).py()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("Intensity.{}({}, {}, {}, {})", p.kind, p.lambda0, p.q, p.mu, p.sigma)
    }
}

/// Volatility model with its asset/volatility correlation, initial
/// volatility state and reference strike.
#[pyclass(frozen, name = "Model")]
struct PyModel {
    inner: FittedModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (gamma, c, eta, y0, strike = 1.15))]
    fn sabr(gamma: f64, c: f64, eta: f64, y0: f64, strike: f64) -> PyResult<Self> {
        let vol = VolModel::Sabr(SabrParams::new(gamma, c).py()?);
        Ok(Self { inner: FittedModel { vol, eta, y0, strike } })
    }

    #[staticmethod]
    #[pyo3(signature = (b, c, eta, y0, strike = 1.15))]
    fn hull_white(b: f64, c: f64, eta: f64, y0: f64, strike: f64) -> PyResult<Self> {
        let vol = VolModel::HullWhite(HullWhiteParams::new(b, c).py()?);
        Ok(Self { inner: FittedModel { vol, eta, y0, strike } })
    }

    #[staticmethod]
    #[pyo3(signature = (k, theta, c, eta, y0, strike = 1.15))]
    fn heston(k: f64, theta: f64, c: f64, eta: f64, y0: f64, strike: f64) -> PyResult<Self> {
        let vol = VolModel::Heston(HestonParams::new(k, theta, c).py()?);
        Ok(Self { inner: FittedModel { vol, eta, y0, strike } })
    }

    /// sabr-fit or heston-fit.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(Self { inner: builtin_model(name).py()? })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.vol.name()
    }
    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }
    #[getter]
    fn y0(&self) -> f64 {
        self.inner.y0
    }
    #[getter]
    fn strike(&self) -> f64 {
        self.inner.strike
    }

    /// Market state with spot 1 at the reference strike unless given.
    #[pyo3(signature = (maturity, strike = None, spot = 1.0))]
    fn market(&self, maturity: f64, strike: Option<f64>, spot: f64) -> PyResult<PyMarket> {
        let k = strike.unwrap_or(self.inner.strike);
        Ok(PyMarket { inner: MarketState::from_levels(spot, k, self.inner.y0, maturity).py()? })
    }

    fn __repr__(&self) -> String {
        format!("Model({:?}, eta={}, y0={}, strike={})", self.inner.vol, self.inner.eta, self.inner.y0, self.inner.strike)
    }
}

/// Correlations of (asset, volatility, intensity) drivers.
#[pyclass(frozen, name = "Correlation")]
struct PyCorrelation {
    inner: CorrelationTriple,
}

#[pymethods]
impl PyCorrelation {
    #[new]
    #[pyo3(signature = (eta, rho, nu = 0.0))]
    fn new(eta: f64, rho: f64, nu: f64) -> PyResult<Self> {
        Ok(Self { inner: CorrelationTriple::new(eta, rho, nu).py()? })
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }
    #[getter]
    fn nu(&self) -> f64 {
        self.inner.nu
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    fn matrix(&self) -> [[f64; 3]; 3] {
        self.inner.matrix()
    }

    fn __repr__(&self) -> String {
        format!("Correlation(eta={}, rho={}, nu={})", self.inner.eta, self.inner.rho, self.inner.nu)
    }
}

/// Valuation time, maturity, log-spot, volatility state and log-strike.
#[pyclass(frozen, name = "Market")]
struct PyMarket {
    inner: MarketState,
}

#[pymethods]
impl PyMarket {
    #[new]
    #[pyo3(signature = (maturity, x, y, kappa, t = 0.0))]
    fn new(maturity: f64, x: f64, y: f64, kappa: f64, t: f64) -> PyResult<Self> {
        Ok(Self { inner: MarketState::new(t, maturity, x, y, kappa).py()? })
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }
    #[getter]
    fn maturity(&self) -> f64 {
        self.inner.maturity
    }
    #[getter]
    fn x(&self) -> f64 {
        self.inner.x
    }
    #[getter]
    fn y(&self) -> f64 {
        self.inner.y
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!("Market(t={}, maturity={}, x={}, y={}, kappa={})", m.t, m.maturity, m.x, m.y, m.kappa)
    }
}

fn quad(dt: f64) -> PyResult<QuadratureConfig> {
    QuadratureConfig::new(QuadratureConfig::default().upper_limit, QuadratureConfig::default().n_nodes, dt).py()
}

fn cva_dict<'py>(py: Python<'py>, r: &CvaResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("total", r.total)?;
    d.set_item("cva0", r.cva0)?;
    d.set_item("cva1", r.cva1)?;
    d.set_item("cva2", r.cva2)?;
    d.set_item("price", r.price)?;
    d.set_item("order", r.order.to_string())?;
    d.set_item("pairing", r.pairing.to_string())?;
    Ok(d)
}

fn mc_dict<'py>(py: Python<'py>, e: &McEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", e.mean)?;
    d.set_item("stderr", e.std_error)?;
    d.set_item("raw_mean", e.raw_mean)?;
    d.set_item("raw_stderr", e.raw_std_error)?;
    d.set_item("cv_correlation", e.cv_correlation)?;
    d.set_item("cv_beta", e.cv_beta)?;
    d.set_item("paths", e.n_paths)?;
    d.set_item("steps", e.n_steps)?;
    d.set_item("seed", e.seed)?;
    Ok(d)
}

/// Default-free call price and Greeks (`u`, `ux`, `uy`, `uxx`, `uxy`).
#[pyfunction]
#[pyo3(signature = (model, market, dt = 0.01))]
fn price<'py>(py: Python<'py>, model: PyRef<'_, PyModel>, market: PyRef<'_, PyMarket>, dt: f64) -> PyResult<Bound<'py, PyDict>> {
    let corr = CorrelationTriple::new(model.inner.eta, 0.0, 0.0).py()?;
    let g = price_and_greeks(&model.inner.vol, &market.inner, &corr, &quad(dt)?).py()?;
    let d = PyDict::new(py);
    d.set_item("u", g.u)?;
    d.set_item("ux", g.ux)?;
    d.set_item("uy", g.uy)?;
    d.set_item("uxx", g.uxx)?;
    d.set_item("uxy", g.uxy)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (model, intensity, market, corr, dt = 0.01))]
fn cva_first<'py>(
    py: Python<'py>,
    model: PyRef<'_, PyModel>,
    intensity: PyRef<'_, PyIntensity>,
    market: PyRef<'_, PyMarket>,
    corr: PyRef<'_, PyCorrelation>,
    dt: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let pairing = ModelPairing::new(model.inner.vol, intensity.inner);
    let r = cva_first_order(&pairing, &market.inner, &corr.inner, &quad(dt)?).py()?;
    cva_dict(py, &r)
}

/// Second-order CVA for the SABR and Heston CIR pairings.
#[pyfunction]
#[pyo3(signature = (model, intensity, market, rho, dt = 0.01))]
fn cva_second<'py>(
    py: Python<'py>,
    model: PyRef<'_, PyModel>,
    intensity: PyRef<'_, PyIntensity>,
    market: PyRef<'_, PyMarket>,
    rho: f64,
    dt: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let pairing = ModelPairing::new(model.inner.vol, intensity.inner);
    let r = cva_second_order(&pairing, &market.inner, model.inner.eta, rho, &quad(dt)?).py()?;
    cva_dict(py, &r)
}

/// Monte Carlo CVA with the default-free price as control variate.
#[pyfunction]
#[pyo3(signature = (model, intensity, market, corr, paths = 100_000, steps = 500, seed = 42))]
#[allow(clippy::too_many_arguments)]
fn cva_mc<'py>(
    py: Python<'py>,
    model: PyRef<'_, PyModel>,
    intensity: PyRef<'_, PyIntensity>,
    market: PyRef<'_, PyMarket>,
    corr: PyRef<'_, PyCorrelation>,
    paths: usize,
    steps: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let pairing = ModelPairing::new(model.inner.vol, intensity.inner);
    let mc = McConfig::new(paths, steps, seed).py()?;
    let (state, c) = (market.inner, corr.inner);
    let est = py.detach(|| run_mc_cva(&pairing, &state, &c, &mc, &QuadratureConfig::default())).py()?;
    mc_dict(py, &est)
}

/// Runs a key=value config (sweep or sensitivity) and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (text, overrides = None))]
fn run_config(py: Python<'_>, text: &str, overrides: Option<Vec<(String, String)>>) -> PyResult<String> {
    let cfg = parse_config(Some(text), &overrides.unwrap_or_default()).py()?;
    let out = py.detach(|| sweep::run(&cfg)).py()?;
    Ok(out.to_csv_string())
}

#[pymodule]
fn cva_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PyIntensity>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyCorrelation>()?;
    m.add_class::<PyMarket>()?;
    m.add_function(wrap_pyfunction!(price, m)?)?;
    m.add_function(wrap_pyfunction!(cva_first, m)?)?;
    m.add_function(wrap_pyfunction!(cva_second, m)?)?;
    m.add_function(wrap_pyfunction!(cva_mc, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    Ok(())
}
