//! Quadrature rules: composite trapezoid on uniform time grids and
//! Gauss-Legendre panels for the Fourier integrals.

use std::sync::OnceLock;

use crate::error::{CvaError, Result};

/// Numerical settings shared by the pricers and the CVA formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Truncation of the Fourier integrals.
    pub upper_limit: f64,
    /// Initial number of Gauss-Legendre nodes on `[0, upper_limit]`.
    pub n_nodes: usize,
    /// Step of the trapezoid rule for time integrals.
    pub dt: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { upper_limit: 200.0, n_nodes: 64, dt: 1e-2 }
    }
}

impl QuadratureConfig {
    pub fn new(upper_limit: f64, n_nodes: usize, dt: f64) -> Result<Self> {
        let q = Self { upper_limit, n_nodes, dt };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.upper_limit > 0.0) {
            return Err(CvaError::InvalidParameter(format!(
                "Fourier upper limit must be positive, got {}",
                self.upper_limit
            )));
        }
        if self.n_nodes < 16 {
            return Err(CvaError::InvalidParameter(format!(
                "need at least 16 quadrature nodes, got {}",
                self.n_nodes
            )));
        }
        if !(self.dt > 0.0) {
            return Err(CvaError::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..*self }
    }
}

/// Composite trapezoid rule for samples on a uniform grid with spacing `dt`.
pub fn trapezoid(values: &[f64], dt: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(CvaError::Domain(format!(
            "trapezoid needs at least 2 samples, got {}",
            values.len()
        )));
    }
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    Ok(dt * (0.5 * (values[0] + values[n - 1]) + inner))
}

/// Running trapezoid integral: `out[i]` approximates the integral from the
/// first node to node `i`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}

/// Uniform grid on `[start, end]` whose spacing is at most `max_dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, max_dt: f64) -> Self {
        let span = end - start;
        let n_steps = ((span / max_dt) - 1e-9).ceil().max(1.0) as usize;
        Self { start, end, step: span / n_steps as f64, n_steps }
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.end
        } else {
            self.start + i as f64 * self.step
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn sample<F: FnMut(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.points().map(f).collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        trapezoid(values, self.step).expect("grid always has at least two nodes")
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

pub(crate) const PANEL_ORDER: usize = 16;

pub(crate) fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// Fixed-order Gauss-Legendre integral of `f` over `[a, b]`.
pub fn gauss_legendre_integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = if n == PANEL_ORDER { panel_rule().clone() } else { gauss_legendre(n) };
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Composite Gauss-Legendre integration of a vector-valued integrand on
/// `[0, upper]`. The panel count doubles until every component changes by
/// less than `tol` between refinements.
pub fn adaptive_panels<const N: usize, F>(
    f: F,
    upper: f64,
    initial_nodes: usize,
    tol: f64,
) -> Result<[f64; N]>
where
    F: Fn(f64) -> [f64; N],
{
    let (x, w) = panel_rule();
    let mut panels = initial_nodes.div_ceil(PANEL_ORDER).max(1);
    let eval = |panels: usize| -> [f64; N] {
        let width = upper / panels as f64;
        let mut acc = [0.0; N];
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(w) {
                let v = f(mid + 0.5 * width * xi);
                for k in 0..N {
                    acc[k] += wi * v[k];
                }
            }
        }
        acc.map(|a| a * 0.5 * width)
    };
    let mut prev = eval(panels);
    for _ in 0..12 {
        panels *= 2;
        let next = eval(panels);
        let diff = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if diff < tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(CvaError::Quadrature(format!(
        "Gauss-Legendre panels did not converge on [0, {upper}] with {panels} panels"
    )))
}
