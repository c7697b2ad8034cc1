//! Coefficient expressions for the perturbed p-Laplace problem, their bounds
//! check, and sampling onto grids.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::CoeffExpr;
use crate::grid::{Grid, ScalarField};

/// Relative slack used when comparing sampled coefficients with their bounds,
/// so that a bound attained exactly (e.g. `1/0.4 = 2.5`) is accepted.
pub const BOUND_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemCoefficients {
    pub sigma: CoeffExpr,
    pub gamma: CoeffExpr,
    pub p: f64,
    /// σ must lie in `[lambda, 1/lambda]`.
    pub lambda: f64,
    /// γ must lie in `[m1, 1/m1]`.
    pub m1: f64,
}

impl ProblemCoefficients {
    pub fn new(sigma: &str, gamma: &str, p: f64, lambda: f64, m1: f64) -> Result<Self> {
        let c = Self {
            sigma: CoeffExpr::parse(sigma)?,
            gamma: CoeffExpr::parse(gamma)?,
            p,
            lambda,
            m1,
        };
        c.check_scalars(true)?;
        Ok(c)
    }

    /// Checks `p > 1`, and `p != 2` unless `allow_linear`; the bound constants
    /// must lie in `(0, 1]`.
    pub fn check_scalars(&self, allow_linear: bool) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidInput(format!("exponent p = {} must exceed 1", self.p)));
        }
        if !allow_linear && self.p == 2.0 {
            return Err(Error::InvalidInput(
                "exponent p = 2 makes the reconstruction functionals singular".into(),
            ));
        }
        for (name, v) in [("lambda", self.lambda), ("m1", self.m1)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidInput(format!("{name} = {v} must lie in (0, 1]")));
            }
        }
        Ok(())
    }

    /// Copy with γ multiplied by a constant factor.
    pub fn with_gamma_scaled(&self, factor: f64) -> Result<Self> {
        let mut c = self.clone();
        c.gamma = CoeffExpr::parse(&format!("{factor:?} * ({})", self.gamma.source()))?;
        Ok(c)
    }
}

/// Extremes of one coefficient over the grid nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
    pub argmin: [f64; 2],
    pub argmax: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub sigma: Extremes,
    pub gamma: Extremes,
}

fn extremes(name: &'static str, e: &CoeffExpr, g: &Grid, bound: f64) -> Result<Extremes> {
    let (lower, upper) = (bound, 1.0 / bound);
    let mut ext = Extremes {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        argmin: [0.0; 2],
        argmax: [0.0; 2],
    };
    for k in 0..g.node_count() {
        let [x1, x2] = g.coords(k);
        let v = e.eval(x1, x2);
        if !v.is_finite() {
            return Err(Error::NotFinite {
                expr: e.source().to_string(),
                x1,
                x2,
            });
        }
        if v < lower * (1.0 - BOUND_SLACK) || v > upper * (1.0 + BOUND_SLACK) {
            return Err(Error::BoundViolation {
                name,
                expr: e.source().to_string(),
                value: v,
                x1,
                x2,
                lower,
                upper,
            });
        }
        if v < ext.min {
            ext.min = v;
            ext.argmin = [x1, x2];
        }
        if v > ext.max {
            ext.max = v;
            ext.argmax = [x1, x2];
        }
    }
    Ok(ext)
}

/// Checks `lambda <= σ <= 1/lambda` and `m1 <= γ <= 1/m1` at every node.
pub fn validate_bounds(c: &ProblemCoefficients, g: &Grid) -> Result<BoundsReport> {
    c.check_scalars(true)?;
    Ok(BoundsReport {
        sigma: extremes("sigma", &c.sigma, g, c.lambda)?,
        gamma: extremes("gamma", &c.gamma, g, c.m1)?,
    })
}

/// Pointwise evaluation at the grid nodes.
pub fn sample(e: &CoeffExpr, g: &Grid) -> ScalarField {
    g.sample(|x1, x2| C64::new(e.eval(x1, x2), 0.0))
}

/// Real samples at the grid nodes.
pub fn sample_real(e: &CoeffExpr, g: &Grid) -> Vec<f64> {
    (0..g.node_count())
        .map(|k| {
            let [x1, x2] = g.coords(k);
            e.eval(x1, x2)
        })
        .collect()
}
