//! Extrapolation of parameter-indexed series to their `t -> 0` limit with the
//! model `a + b t^q`.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};

/// A fitted model is accepted when its largest residual stays below this
/// fraction of the spread of the data.
pub const RESIDUAL_FRACTION: f64 = 0.1;

/// Series whose spread is below this fraction of their magnitude are treated
/// as constant.
pub const CONSTANT_FLOOR: f64 = 1e-9;

/// Non-decaying series whose spread stays below this fraction of their
/// magnitude have settled at the noise floor; the finest value is reported.
pub const SETTLED_FRACTION: f64 = 1e-3;

const Q_RANGE: (f64, f64) = (0.2, 4.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub q: f64,
    pub limit: C64,
    pub coefficient: C64,
    /// Largest `|value - model|` over the points.
    pub residual: f64,
}

impl PowerFit {
    pub fn model(&self, t: f64) -> C64 {
        self.limit + self.coefficient * t.powf(self.q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderSource {
    Hint,
    Estimated,
    Constant,
}

/// A series `(t_k, v_k)` together with its extrapolated limit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitSeries {
    /// Points ordered by decreasing parameter.
    pub points: Vec<(f64, C64)>,
    /// The fit used for the reported limit.
    pub fit: PowerFit,
    pub source: OrderSource,
    /// Fit with the hinted order, if one was given.
    pub hinted: Option<PowerFit>,
    /// Fit with the order chosen by least squares over `[0.2, 4]`.
    pub estimated: Option<PowerFit>,
    /// Order estimated from ratios of consecutive differences.
    pub difference_order: Option<f64>,
    /// Largest pairwise distance between values.
    pub spread: f64,
    /// True when the hinted fit was accepted and the estimated-order fit
    /// agrees with it to within the acceptance margin.
    pub confident: bool,
}

impl LimitSeries {
    pub fn limit(&self) -> C64 {
        self.fit.limit
    }

    pub fn fitted(&self) -> Vec<C64> {
        self.points.iter().map(|(t, _)| self.fit.model(*t)).collect()
    }

    /// `value - model` per point.
    pub fn residuals(&self) -> Vec<C64> {
        self.points
            .iter()
            .map(|(t, v)| v - self.fit.model(*t))
            .collect()
    }

    pub fn values(&self) -> Vec<C64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    /// `|v_k - limit|` per point.
    pub fn errors_to(&self, target: C64) -> Vec<f64> {
        self.points.iter().map(|(_, v)| (v - target).norm()).collect()
    }
}

/// Least-squares fit of `a + b t^q` for fixed `q`.
pub fn fit_power(points: &[(f64, C64)], q: f64) -> PowerFit {
    let n = points.len() as f64;
    let s: Vec<f64> = points.iter().map(|(t, _)| t.powf(q)).collect();
    let ms = s.iter().sum::<f64>() / n;
    let mv = points.iter().map(|p| p.1).sum::<C64>() / n;
    let sxx: f64 = s.iter().map(|x| (x - ms) * (x - ms)).sum();
    let sxy: C64 = s
        .iter()
        .zip(points)
        .map(|(x, (_, v))| (v - mv) * (x - ms))
        .sum();
    let b = if sxx > 0.0 { sxy / sxx } else { C64::new(0.0, 0.0) };
    let a = mv - b * ms;
    let residual = s
        .iter()
        .zip(points)
        .map(|(x, (_, v))| (v - a - b * x).norm())
        .fold(0.0, f64::max);
    PowerFit {
        q,
        limit: a,
        coefficient: b,
        residual,
    }
}

/// Order minimizing the least-squares residual over `[0.2, 4]`.
pub fn estimate_order(points: &[(f64, C64)]) -> PowerFit {
    let sse = |q: f64| {
        let f = fit_power(points, q);
        points
            .iter()
            .map(|(t, v)| (v - f.model(*t)).norm_sqr())
            .sum::<f64>()
    };
    let steps = 380;
    let mut best = (Q_RANGE.0, f64::INFINITY);
    for k in 0..=steps {
        let q = Q_RANGE.0 + (Q_RANGE.1 - Q_RANGE.0) * k as f64 / steps as f64;
        let e = sse(q);
        if e < best.1 {
            best = (q, e);
        }
    }
    let h = (Q_RANGE.1 - Q_RANGE.0) / steps as f64;
    let (mut a, mut b) = ((best.0 - h).max(Q_RANGE.0), (best.0 + h).min(Q_RANGE.1));
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (c1, c2) = (b - gr * (b - a), a + gr * (b - a));
        if sse(c1) < sse(c2) {
            b = c2;
        } else {
            a = c1;
        }
    }
    fit_power(points, 0.5 * (a + b))
}

/// Median of `log(|d_(k+1)| / |d_k|) / log(t_(k+1) / t_k)`; exact for
/// geometric parameters and a pure power-law remainder.
fn difference_order(points: &[(f64, C64)]) -> Option<f64> {
    let d: Vec<f64> = points.windows(2).map(|w| (w[1].1 - w[0].1).norm()).collect();
    let mut est: Vec<f64> = d
        .windows(2)
        .zip(points.windows(2))
        .filter(|(dd, _)| dd[0] > 0.0 && dd[1] > 0.0)
        .map(|(dd, pp)| (dd[1] / dd[0]).ln() / (pp[1].0 / pp[0].0).ln())
        .collect();
    if est.is_empty() {
        return None;
    }
    est.sort_by(|a, b| a.total_cmp(b));
    Some(est[est.len() / 2])
}

fn spread(points: &[(f64, C64)]) -> f64 {
    let mut s: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            s = s.max((a.1 - b.1).norm());
        }
    }
    s
}

fn accepted(fit: &PowerFit, spread: f64) -> bool {
    fit.residual < RESIDUAL_FRACTION * spread && fit.limit.re.is_finite() && fit.limit.im.is_finite()
}

/// Extrapolates `(t, value)` pairs to `t -> 0`.
///
/// With a hint the order is fixed; the estimated-order fit is always computed
/// as well and used when the hinted fit misses the residual target.
/// Non-decaying or oscillating series are rejected.
pub fn extrapolate(points: &[(f64, C64)], q_hint: Option<f64>) -> Result<LimitSeries> {
    extrapolate_scaled(points, q_hint, 0.0)
}

/// As [`extrapolate`], with the constant and settled tests measured against
/// `max(reference, max |v|)`; used when the values are differences of
/// larger terms.
pub fn extrapolate_scaled(
    points: &[(f64, C64)],
    q_hint: Option<f64>,
    reference: f64,
) -> Result<LimitSeries> {
    if points.len() < 4 {
        return Err(Error::Extrapolation(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|(t, v)| !(*t > 0.0) || !t.is_finite() || !v.re.is_finite() || !v.im.is_finite())
    {
        return Err(Error::Extrapolation(
            "parameters must be positive and values finite".into(),
        ));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let spread = spread(&pts);
    let scale = pts.iter().map(|p| p.1.norm()).fold(reference, f64::max);
    let diff_q = difference_order(&pts);

    let d: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1).norm()).collect();
    let decaying = d.last().unwrap() < &(0.9 * d[0]);
    let settled = !decaying && spread <= SETTLED_FRACTION * scale;
    if spread <= CONSTANT_FLOOR * scale || spread == 0.0 || settled {
        let last = pts.last().unwrap().1;
        let fit = PowerFit {
            q: q_hint.unwrap_or(1.0),
            limit: last,
            coefficient: C64::new(0.0, 0.0),
            residual: spread,
        };
        return Ok(LimitSeries {
            points: pts,
            fit,
            source: OrderSource::Constant,
            hinted: None,
            estimated: None,
            difference_order: diff_q,
            spread,
            confident: true,
        });
    }

    if !decaying {
        return Err(Error::Extrapolation(format!(
            "differences do not decay: first {:.3e}, last {:.3e}",
            d[0],
            d.last().unwrap()
        )));
    }

    let hinted = q_hint.map(|q| fit_power(&pts, q));
    let estimated = estimate_order(&pts);
    let est_ok = accepted(&estimated, spread);
    let (fit, source) = match hinted {
        Some(h) if accepted(&h, spread) => (h, OrderSource::Hint),
        _ if est_ok => (estimated, OrderSource::Estimated),
        _ => {
            return Err(Error::Extrapolation(format!(
                "no acceptable fit: hinted residual {:?}, estimated residual {:.3e} (q = {:.3}), spread {:.3e}",
                hinted.map(|h| h.residual),
                estimated.residual,
                estimated.q,
                spread
            )))
        }
    };
    let confident = source == OrderSource::Hint
        && est_ok
        && (estimated.limit - fit.limit).norm() < RESIDUAL_FRACTION * spread;
    Ok(LimitSeries {
        points: pts,
        fit,
        source,
        hinted,
        estimated: Some(estimated),
        difference_order: diff_q,
        spread,
        confident,
    })
}

/// Slope of `log|y|` against `log x` by least squares.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
