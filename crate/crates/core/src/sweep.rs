//! Correlation sweeps and intensity-parameter sensitivity runs, with CSV
//! output.
//!
//! Sweep CSV columns: `rho,cva_mc,cva_mc_stderr,cv_corr,cva_first,cva_second`.
//! Sensitivity CSV columns: `model,<param>,rho,cva0,cva1,cva_first,cva_second`,
//! where `cva1` is the correlation term of the first-order formula. Both are
//! preceded by `# key=value` lines holding the resolved configuration.
//! Fields of methods that were not requested or do not apply are empty.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::config::{Method, Mode, ModelKind, RunConfig};
use crate::cva::{cva_first_order_with, cva_second_order_with, CvaResult};
use crate::error::Result;
use crate::montecarlo::{run_mc_cva, McEstimate};
use crate::params::{CorrelationTriple, ModelPairing, PairingKind};

pub const SWEEP_COLUMNS: [&str; 6] = ["rho", "cva_mc", "cva_mc_stderr", "cv_corr", "cva_first", "cva_second"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rho: f64,
    pub mc: Option<McEstimate>,
    pub first: Option<CvaResult>,
    pub second: Option<CvaResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub header: Vec<(&'static str, String)>,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub model: ModelKind,
    pub value: f64,
    pub rho: f64,
    pub first: CvaResult,
    pub second: Option<CvaResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    pub header: Vec<(&'static str, String)>,
    pub param: String,
    pub rows: Vec<SensitivityRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutput {
    Sweep(SweepTable),
    Sensitivity(SensitivityTable),
}

impl RunOutput {
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        match self {
            RunOutput::Sweep(t) => t.write_csv(w),
            RunOutput::Sensitivity(t) => t.write_csv(w),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

/// Runs the configured mode.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    match cfg.mode {
        Mode::Sweep => run_rho_sweep(cfg).map(RunOutput::Sweep),
        Mode::Sensitivity => run_sensitivity(cfg).map(RunOutput::Sensitivity),
    }
}

fn second_order_applies(kind: PairingKind, nu: f64) -> bool {
    matches!(kind, PairingKind::SabrCir | PairingKind::HestonCir) && nu == 0.0
}

/// Evaluates every requested method at each correlation of the grid. Every
/// Monte Carlo cell reuses the configured seed, so neighbouring cells share
/// their random numbers. Rows follow the grid order.
pub fn run_rho_sweep(cfg: &RunConfig) -> Result<SweepTable> {
    let fm = cfg.fitted_model(cfg.model)?;
    let pairing = ModelPairing::new(fm.vol, cfg.intensity_params()?);
    let state = cfg.market_state(&fm)?;
    let kind = pairing.kind();
    let wants = |m: Method| cfg.methods.contains(&m);
    let with_second = wants(Method::Second) && second_order_applies(kind, cfg.nu);
    if wants(Method::Second) && !with_second {
        log::warn!("no second-order formula for {kind} with nu = {}; column left empty", cfg.nu);
    }
    let rows = cfg
        .rho_grid
        .par_iter()
        .map(|&rho| -> Result<SweepRow> {
            let ctx = format!("{kind} at rho = {rho}");
            let corr = CorrelationTriple::new(fm.eta, rho, cfg.nu).map_err(|e| e.context(&ctx))?;
            let mc = if wants(Method::Mc) {
                Some(run_mc_cva(&pairing, &state, &corr, &cfg.mc, &cfg.quad).map_err(|e| e.context(format!("mc, {ctx}")))?)
            } else {
                None
            };
            let first = if wants(Method::First) {
                Some(
                    cva_first_order_with(&pairing, &state, &corr, &cfg.quad, &cfg.formula)
                        .map_err(|e| e.context(format!("first order, {ctx}")))?,
                )
            } else {
                None
            };
            let second = if with_second {
                Some(
                    cva_second_order_with(&pairing, &state, fm.eta, rho, &cfg.quad, &cfg.formula)
                        .map_err(|e| e.context(format!("second order, {ctx}")))?,
                )
            } else {
                None
            };
            Ok(SweepRow { rho, mc, first, second })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { header: cfg.entries(), rows })
}

/// First-order (and optionally second-order) CVA across values of the
/// intensity's `mu` or `sigma`, for each configured model and correlation.
pub fn run_sensitivity(cfg: &RunConfig) -> Result<SensitivityTable> {
    let mut cells = Vec::new();
    for &model in &cfg.sensitivity_models {
        for &value in &cfg.sensitivity_values {
            for &rho in &cfg.rho_grid {
                cells.push((model, value, rho));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(model, value, rho)| -> Result<SensitivityRow> {
            let fm = cfg.fitted_model(model)?;
            let pairing = ModelPairing::new(fm.vol, cfg.intensity_params_with(Some(value))?);
            let state = cfg.market_state(&fm)?;
            let ctx = format!("{} with {} = {value} at rho = {rho}", pairing.kind(), cfg.sensitivity_param);
            let corr = CorrelationTriple::new(fm.eta, rho, cfg.nu).map_err(|e| e.context(&ctx))?;
            let first = cva_first_order_with(&pairing, &state, &corr, &cfg.quad, &cfg.formula)
                .map_err(|e| e.context(format!("first order, {ctx}")))?;
            let second = if cfg.methods.contains(&Method::Second) && second_order_applies(pairing.kind(), cfg.nu) {
                Some(
                    cva_second_order_with(&pairing, &state, fm.eta, rho, &cfg.quad, &cfg.formula)
                        .map_err(|e| e.context(format!("second order, {ctx}")))?,
                )
            } else {
                None
            };
            Ok(SensitivityRow { model, value, rho, first, second })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityTable { header: cfg.entries(), param: cfg.sensitivity_param.to_string(), rows })
}

fn write_header<W: Write>(w: &mut W, header: &[(&'static str, String)]) -> io::Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_header(&mut w, &self.header)?;
        let mut out = csv_writer(w);
        out.write_record(SWEEP_COLUMNS)?;
        for r in &self.rows {
            out.write_record([
                r.rho.to_string(),
                num(r.mc.map(|m| m.mean)),
                num(r.mc.map(|m| m.std_error)),
                r.mc.map(|m| m.cv_correlation.to_string()).unwrap_or_default(),
                num(r.first.map(|c| c.total)),
                num(r.second.map(|c| c.total)),
            ])?;
        }
        out.flush()
    }
}

impl SensitivityTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_header(&mut w, &self.header)?;
        let mut out = csv_writer(w);
        out.write_record(["model", self.param.as_str(), "rho", "cva0", "cva1", "cva_first", "cva_second"])?;
        for r in &self.rows {
            out.write_record([
                r.model.to_string(),
                r.value.to_string(),
                r.rho.to_string(),
                num(Some(r.first.cva0)),
                num(Some(r.first.cva1)),
                num(Some(r.first.total)),
                num(r.second.map(|c| c.total)),
            ])?;
        }
        out.flush()
    }
}
