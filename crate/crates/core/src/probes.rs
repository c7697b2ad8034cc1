//! Oscillating boundary probes concentrated at a boundary point.
//!
//! Two families are built:
//!
//! * `u_M = C (w0 + w1)` with `w0 = η(M(x - x0)) exp(N(iζ.(x - x0) - ρ(x)))`
//!   and `w1` its zero-boundary conductivity corrector; its energy
//!   concentrates at `x0` as `M, N -> ∞` with `M/N -> 0`;
//! * the pair `u2 = ξ_N Ψ_N + s_N`, `u3 = ξ_N Φ_N + r_N` with
//!   `Φ_N = exp(iN x1 - N x2) η(√N x1)` and `Ψ_N` the same at half
//!   frequency, used to read off normal derivatives of a weight.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ConductivitySolver;
use crate::grid::{Grid, ScalarField};

/// Largest admissible `frequency * spacing`.
pub const MAX_PHASE_PER_CELL: f64 = 0.5;
/// Smallest number of grid spacings across a cutoff radius.
pub const MIN_NODES_PER_RADIUS: f64 = 4.0;

fn flat(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CutoffShape {
    /// Equal to 1 on `r <= inner`, 0 on `r >= 1`, smooth in between.
    Plateau { inner: f64 },
    /// `exp(1 - 1/(1 - r^2))` on `r < 1`.
    Bump,
}

/// Radial cutoff `amplitude * shape(r)`, supported in the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cutoff {
    pub shape: CutoffShape,
    pub amplitude: f64,
}

const PROFILE_NODES: usize = 20_001;

impl Cutoff {
    pub fn plateau(inner: f64) -> Self {
        Self {
            shape: CutoffShape::Plateau { inner },
            amplitude: 1.0,
        }
    }

    pub fn bump() -> Self {
        Self {
            shape: CutoffShape::Bump,
            amplitude: 1.0,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= 1.0 {
            return 0.0;
        }
        let v = match self.shape {
            CutoffShape::Plateau { inner } => {
                if r <= inner {
                    1.0
                } else {
                    let a = flat(1.0 - r);
                    let b = flat(r - inner);
                    a / (a + b)
                }
            }
            CutoffShape::Bump => (1.0 - 1.0 / (1.0 - r * r)).exp(),
        };
        self.amplitude * v
    }

    /// `int_R η(t)^k dt` by the composite Simpson rule with `nodes` points.
    pub fn moment(&self, power: i32, nodes: usize) -> f64 {
        simpson(|t| self.eval(t).powi(power), nodes)
    }

    /// `int_R η'(t)^2 dt` with central-difference derivatives.
    pub fn gradient_energy(&self, nodes: usize) -> f64 {
        let d = 1e-6;
        simpson(
            |t| {
                let v = (self.eval(t + d) - self.eval(t - d)) / (2.0 * d);
                v * v
            },
            nodes,
        )
    }

    /// Same shape rescaled to `int η^2 = 1` on the real line.
    pub fn normalized(&self) -> Self {
        let base = Self {
            shape: self.shape,
            amplitude: 1.0,
        };
        Self {
            shape: self.shape,
            amplitude: 1.0 / base.moment(2, PROFILE_NODES).sqrt(),
        }
    }

    pub fn l2_squared(&self) -> f64 {
        self.moment(2, PROFILE_NODES)
    }

    pub fn dirichlet_energy(&self) -> f64 {
        self.gradient_energy(PROFILE_NODES)
    }
}

fn simpson<F: Fn(f64) -> f64>(f: F, nodes: usize) -> f64 {
    let n = if nodes % 2 == 0 { nodes + 1 } else { nodes };
    let h = 2.0 / (n - 1) as f64;
    let mut s = f(-1.0) + f(1.0);
    for k in 1..n - 1 {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(-1.0 + k as f64 * h);
    }
    s * h / 3.0
}

/// How the `u_M` amplitude is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Unit Dirichlet energy of the unit-conductivity extension of the
    /// probe's boundary data, measured on the grid.
    #[default]
    Calibrated,
    /// `C^2 = M / (N int η(x1, 0)^2 dx1)` from the half-plane asymptotics.
    Asymptotic,
}

/// Boundary point, tangent direction, defining function and cutoffs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeFrame {
    pub x0: [f64; 2],
    /// Unit tangent with `ζ . grad ρ(x0) = 0`.
    pub zeta: [f64; 2],
    /// Cutoff of `u_M` (equal to 1 on the half ball).
    pub eta: Cutoff,
    /// Cutoff of the oscillating pair, normalized to unit `L^2` norm.
    pub eta_pair: Cutoff,
    /// Vertical cutoff of the oscillating pair.
    pub xi: Cutoff,
}

impl Default for ProbeFrame {
    fn default() -> Self {
        Self::model(CutoffShape::Plateau { inner: 0.5 })
    }
}

impl ProbeFrame {
    /// Frame at the origin of the flat bottom face with `ρ = x2`, `ζ = e1`,
    /// using `pair_shape` for the oscillating pair.
    pub fn model(pair_shape: CutoffShape) -> Self {
        Self {
            x0: [0.0, 0.0],
            zeta: [1.0, 0.0],
            eta: Cutoff::plateau(0.5),
            eta_pair: Cutoff {
                shape: pair_shape,
                amplitude: 1.0,
            }
            .normalized(),
            xi: Cutoff::plateau(0.5),
        }
    }

    /// Alternative cutoffs of a different shape for independence checks.
    pub fn alternative() -> Self {
        Self {
            eta: Cutoff::plateau(0.7),
            ..Self::model(CutoffShape::Bump)
        }
    }

    /// `ρ(x) = x2`, the distance to the flat face.
    pub fn rho(&self, x: [f64; 2]) -> f64 {
        x[1]
    }

    pub fn grad_rho(&self) -> [f64; 2] {
        [0.0, 1.0]
    }

    pub fn validate(&self, g: &Grid) -> Result<()> {
        let gr = self.grad_rho();
        let dot = self.zeta[0] * gr[0] + self.zeta[1] * gr[1];
        let nz = (self.zeta[0].powi(2) + self.zeta[1].powi(2)).sqrt();
        let ng = (gr[0].powi(2) + gr[1].powi(2)).sqrt();
        if dot.abs() > 1e-12 || (nz - ng).abs() > 1e-12 {
            return Err(Error::InvalidInput(
                "tangent must be orthogonal to grad rho with the same length".into(),
            ));
        }
        if self.x0[1] != 0.0 || !(self.x0[0] > g.x_min() && self.x0[0] < g.x_max()) {
            return Err(Error::InvalidInput(format!(
                "x0 = {:?} must lie inside the bottom face",
                self.x0
            )));
        }
        Ok(())
    }

    /// `int η(x1, 0)^2 dx1` for the cutoff of `u_M`.
    pub fn c_eta(&self) -> f64 {
        self.eta.l2_squared()
    }

    /// `int |η'|^2` of the pair cutoff.
    pub fn pair_gradient_energy(&self) -> f64 {
        self.eta_pair.dirichlet_energy()
    }
}

fn under_resolved(g: &Grid, frequency: f64) -> Error {
    let extent = (g.x_max() - g.x_min()).max(g.height());
    Error::UnderResolved {
        frequency,
        max_spacing: g.max_spacing(),
        required_nodes: (extent * frequency / MAX_PHASE_PER_CELL).ceil() as usize + 1,
        extent,
    }
}

fn check_frequency(g: &Grid, n: f64) -> Result<()> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidInput(format!("frequency {n} must be positive")));
    }
    if n * g.max_spacing() > MAX_PHASE_PER_CELL * (1.0 + 1e-12) {
        return Err(under_resolved(g, n));
    }
    Ok(())
}

/// Checks that a cutoff of radius `r` (laterally) and depth `depth` centred
/// at `x0` fits in the grid and is resolved.
fn check_support(g: &Grid, x0: [f64; 2], r: f64, depth: f64) -> Result<()> {
    if r < MIN_NODES_PER_RADIUS * g.max_spacing() {
        let extent = (g.x_max() - g.x_min()).max(g.height());
        return Err(Error::UnderResolved {
            frequency: 1.0 / r,
            max_spacing: g.max_spacing(),
            required_nodes: (extent * MIN_NODES_PER_RADIUS / r).ceil() as usize + 1,
            extent,
        });
    }
    if x0[0] - r < g.x_min() || x0[0] + r > g.x_max() || depth > g.height() {
        return Err(Error::InvalidInput(format!(
            "probe support radius {r:.4} does not fit in the domain"
        )));
    }
    Ok(())
}

/// `w0 = η(M(x - x0)) exp(N(iζ.(x - x0) - ρ(x)))`.
pub fn make_w0(frame: &ProbeFrame, g: &Grid, m: f64, n: f64) -> Result<ScalarField> {
    frame.validate(g)?;
    check_frequency(g, n)?;
    check_support(g, frame.x0, 1.0 / m, 1.0 / m)?;
    let [a, b] = frame.x0;
    let z = frame.zeta;
    Ok(g.sample(|x, y| {
        let r = m * ((x - a).powi(2) + (y - b).powi(2)).sqrt();
        let eta = frame.eta.eval(r);
        if eta == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let phase = n * (z[0] * (x - a) + z[1] * (y - b));
        let decay = (-n * frame.rho([x, y])).exp();
        C64::from_polar(eta * decay, phase)
    }))
}

/// A corrected probe `scale * (approx + corrector)`.
#[derive(Clone, Debug)]
pub struct Probe {
    pub field: ScalarField,
    pub approx: ScalarField,
    pub corrector: ScalarField,
    pub scale: f64,
}

/// Builds probes on one grid, sharing the conductivity factorization and
/// the unit-conductivity solver used for calibration.
#[derive(Debug)]
pub struct ProbeBuilder<'a> {
    frame: ProbeFrame,
    sigma: &'a ConductivitySolver,
    laplace: OnceLock<ConductivitySolver>,
    normalization: Normalization,
}

impl<'a> ProbeBuilder<'a> {
    pub fn new(frame: ProbeFrame, sigma: &'a ConductivitySolver, normalization: Normalization) -> Result<Self> {
        frame.validate(sigma.grid())?;
        Ok(Self {
            frame,
            sigma,
            laplace: OnceLock::new(),
            normalization,
        })
    }

    pub fn frame(&self) -> &ProbeFrame {
        &self.frame
    }
    pub fn grid(&self) -> &Grid {
        self.sigma.grid()
    }

    fn laplace(&self) -> Result<&ConductivitySolver> {
        if let Some(l) = self.laplace.get() {
            return Ok(l);
        }
        let g = *self.grid();
        let l = ConductivitySolver::from_corner_weights(&g, vec![1.0; 4 * g.cell_count()])?;
        Ok(self.laplace.get_or_init(|| l))
    }

    /// Discrete Dirichlet energy of the harmonic extension of `w`'s trace.
    pub fn harmonic_energy(&self, w: &ScalarField) -> Result<f64> {
        let l = self.laplace()?;
        let h = l.solve(&crate::grid::DirichletData::from_field(w))?;
        Ok(l.pair(&h, &h).re)
    }

    /// Amplitude `C` of the probe built from `w0`.
    pub fn scale(&self, m: f64, n: f64, w0: &ScalarField) -> Result<f64> {
        Ok(match self.normalization {
            Normalization::Asymptotic => (m / (n * self.frame.c_eta())).sqrt(),
            Normalization::Calibrated => 1.0 / self.harmonic_energy(w0)?.sqrt(),
        })
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn u_m(&self, m: f64, n: f64) -> Result<Probe> {
        let g = *self.grid();
        let w0 = make_w0(&self.frame, &g, m, n)?;
        let w1 = self.sigma.corrector(&w0)?;
        let scale = self.scale(m, n, &w0)?;
        Ok(Probe {
            field: w0.add(&w1).scale(C64::new(scale, 0.0)),
            approx: w0,
            corrector: w1,
            scale,
        })
    }

    /// `ξ(√N x2) exp(iκN x1 - κN x2) η(√N x1)` with `κ` the frequency factor.
    pub fn pair_approx(&self, n: f64, factor: f64) -> Result<ScalarField> {
        let g = *self.grid();
        let f = self.frame;
        check_frequency(&g, n)?;
        let r = 1.0 / n.sqrt();
        check_support(&g, f.x0, r, r)?;
        let s = n.sqrt();
        let [a, _] = f.x0;
        Ok(g.sample(|x, y| {
            let eta = f.eta_pair.eval(s * (x - a));
            let xi = f.xi.eval(s * y);
            if eta == 0.0 || xi == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let k = factor * n;
            C64::from_polar(eta * xi * (-k * y).exp(), k * f.zeta[0] * (x - a))
        }))
    }

    pub fn osc_pair(&self, n: f64) -> Result<OscPair> {
        let psi = self.pair_approx(n, 0.5)?;
        let phi = self.pair_approx(n, 1.0)?;
        let s = self.sigma.corrector(&psi)?;
        let r = self.sigma.corrector(&phi)?;
        Ok(OscPair {
            n,
            u2: psi.add(&s),
            u3: phi.add(&r),
            psi,
            phi,
            s,
            r,
        })
    }
}

/// Oscillating pair at frequency `N`: `u2` at half frequency, `u3` at full.
#[derive(Clone, Debug)]
pub struct OscPair {
    pub n: f64,
    pub u2: ScalarField,
    pub u3: ScalarField,
    /// `ξ_N Ψ_N`.
    pub psi: ScalarField,
    /// `ξ_N Φ_N`.
    pub phi: ScalarField,
    pub s: ScalarField,
    pub r: ScalarField,
}

pub fn make_u_m(
    frame: &ProbeFrame,
    sigma: &ConductivitySolver,
    m: f64,
    n: f64,
    normalization: Normalization,
) -> Result<Probe> {
    ProbeBuilder::new(*frame, sigma, normalization)?.u_m(m, n)
}

pub fn make_osc_pair(frame: &ProbeFrame, sigma: &ConductivitySolver, n: f64) -> Result<OscPair> {
    ProbeBuilder::new(*frame, sigma, Normalization::Calibrated)?.osc_pair(n)
}

/// A schedule point that was kept or dropped, with its resolution margins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchedulePoint {
    pub m: f64,
    pub n: f64,
    /// `N h`; must stay below 0.5.
    pub phase_per_cell: f64,
    /// Grid spacings per cutoff radius; must stay above 4.
    pub nodes_per_radius: f64,
    pub kept: bool,
    pub reason: Option<String>,
}

/// Geometric `M` values with `N = M^exponent`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MNSchedule {
    pub m_values: Vec<f64>,
    pub n_exponent: f64,
}

impl Default for MNSchedule {
    fn default() -> Self {
        Self::geometric(3.0, 2f64.sqrt(), 5, 1.5)
    }
}

impl MNSchedule {
    pub fn geometric(m0: f64, ratio: f64, count: usize, n_exponent: f64) -> Self {
        Self {
            m_values: (0..count).map(|k| m0 * ratio.powi(k as i32)).collect(),
            n_exponent,
        }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.m_values
            .iter()
            .map(|&m| (m, m.powf(self.n_exponent)))
            .collect()
    }

    /// Classifies every point against the grid; unresolvable points are
    /// dropped, not clamped.
    pub fn resolve(&self, g: &Grid, frame: &ProbeFrame) -> Vec<SchedulePoint> {
        self.points()
            .into_iter()
            .map(|(m, n)| {
                let h = g.max_spacing();
                let r = 1.0 / m;
                let mut reason = None;
                if !(self.n_exponent > 1.0) {
                    reason = Some("N/M must grow along the schedule".to_string());
                } else if n * h > MAX_PHASE_PER_CELL * (1.0 + 1e-12) {
                    reason = Some(format!("N h = {:.3} exceeds {MAX_PHASE_PER_CELL}", n * h));
                } else if r < MIN_NODES_PER_RADIUS * h {
                    reason = Some(format!("support radius spans {:.2} cells", r / h));
                } else if frame.x0[0] - r < g.x_min() || frame.x0[0] + r > g.x_max() || r > g.height() {
                    reason = Some("support leaves the domain".to_string());
                }
                SchedulePoint {
                    m,
                    n,
                    phase_per_cell: n * h,
                    nodes_per_radius: r / h,
                    kept: reason.is_none(),
                    reason,
                }
            })
            .collect()
    }
}

/// Frequencies of the oscillating pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NSchedule {
    pub n_values: Vec<f64>,
}

impl Default for NSchedule {
    fn default() -> Self {
        Self::geometric(16.0, 2f64.sqrt(), 5)
    }
}

impl NSchedule {
    pub fn geometric(n0: f64, ratio: f64, count: usize) -> Self {
        Self {
            n_values: (0..count).map(|k| n0 * ratio.powi(k as i32)).collect(),
        }
    }

    pub fn resolve(&self, g: &Grid, frame: &ProbeFrame) -> Vec<SchedulePoint> {
        self.n_values
            .iter()
            .map(|&n| {
                let h = g.max_spacing();
                let r = 1.0 / n.sqrt();
                let mut reason = None;
                if n * h > MAX_PHASE_PER_CELL * (1.0 + 1e-12) {
                    reason = Some(format!("N h = {:.3} exceeds {MAX_PHASE_PER_CELL}", n * h));
                } else if r < MIN_NODES_PER_RADIUS * h {
                    reason = Some(format!("support radius spans {:.2} cells", r / h));
                } else if frame.x0[0] - r < g.x_min() || frame.x0[0] + r > g.x_max() || r > g.height() {
                    reason = Some("support leaves the domain".to_string());
                }
                SchedulePoint {
                    m: r.recip(),
                    n,
                    phase_per_cell: n * h,
                    nodes_per_radius: r / h,
                    kept: reason.is_none(),
                    reason,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate_boundary, BoundaryTrace, Face};

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    #[test]
    fn cutoff_properties() {
        for eta in [Cutoff::plateau(0.5), Cutoff::plateau(0.7)] {
            assert_eq!(eta.eval(0.0), 1.0);
            assert_eq!(eta.eval(0.5), 1.0);
            assert_eq!(eta.eval(1.0), 0.0);
            assert_eq!(eta.eval(-1.2), 0.0);
            let mut prev = 1.0;
            for k in 0..=100 {
                let v = eta.eval(k as f64 / 100.0);
                assert!((0.0..=1.0).contains(&v) && v <= prev + 1e-15);
                prev = v;
            }
        }
        let n = Cutoff::bump().normalized();
        assert!((n.l2_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_integrals_converge_under_refinement() {
        for eta in [Cutoff::plateau(0.5).normalized(), Cutoff::bump().normalized()] {
            let coarse = eta.moment(2, 2_001);
            let fine = eta.moment(2, 40_001);
            assert!((coarse - fine).abs() < 1e-8);
            let gc = eta.gradient_energy(4_001);
            let gf = eta.gradient_energy(40_001);
            assert!((gc - gf).abs() < 1e-6 * gf, "{gc} {gf}");
        }
    }

    #[test]
    fn exponential_integral_identities() {
        // Gauss-Laguerre-free check by truncated Simpson on [0, 60]
        let integ = |f: &dyn Fn(f64) -> f64| {
            let n = 600_001;
            let h = 60.0 / (n - 1) as f64;
            let mut s = f(0.0) + f(60.0);
            for k in 1..n - 1 {
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
            }
            s * h / 3.0
        };
        let a = integ(&|y| 2.0 * (-y).exp() - (-2.0 * y).exp());
        let b = integ(&|y| y * ((-y).exp() - 2.0 * (-2.0 * y).exp()));
        let z = integ(&|y| (-y).exp() - 2.0 * (-2.0 * y).exp());
        assert!((a - 1.5).abs() < 1e-8);
        assert!((b - 0.5).abs() < 1e-8);
        assert!(z.abs() < 1e-8);
    }

    #[test]
    fn w0_values() {
        let g = Grid::unit_model(129, 65).unwrap();
        let f = ProbeFrame::default();
        let w0 = make_w0(&f, &g, 4.0, 8.0).unwrap();
        let (i, j) = g.nearest_node([0.0, 0.0]);
        assert!((w0.at(i, j) - c(1.0)).norm() < 1e-14);
        for k in 0..g.node_count() {
            let [x, y] = g.coords(k);
            assert!(w0.values()[k].norm() <= (-8.0 * y).exp() + 1e-15);
            if (x * x + y * y).sqrt() >= 0.25 {
                assert_eq!(w0.values()[k], c(0.0));
            }
        }
    }

    #[test]
    fn w0_refuses_unresolved_frequency() {
        let g = Grid::unit_model(33, 17).unwrap();
        match make_w0(&ProbeFrame::default(), &g, 2.0, 40.0) {
            Err(Error::UnderResolved { required_nodes, .. }) => assert!(required_nodes > 33),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pair_trace_norm() {
        let g = Grid::unit_model(1025, 9).unwrap();
        let f = ProbeFrame::default();
        for n in [16.0f64, 64.0] {
            let s = n.sqrt();
            let t = BoundaryTrace::from_fn(g, Face::Bottom, |x, _| {
                c(f.eta_pair.eval(s * x).powi(2))
            });
            let v = integrate_boundary(&t).re;
            assert!((v - 1.0 / s).abs() < 1e-6 / s, "{v}");
        }
    }

    #[test]
    fn pair_supports_and_traces() {
        let g = Grid::unit_model(257, 129).unwrap();
        let sigma =
            ConductivitySolver::from_corner_weights(&g, vec![1.0; 4 * g.cell_count()]).unwrap();
        let b = ProbeBuilder::new(ProbeFrame::default(), &sigma, Normalization::Calibrated).unwrap();
        let pair = b.osc_pair(16.0).unwrap();
        let (i, j) = g.nearest_node([0.0, 0.0]);
        let center = ProbeFrame::default().eta_pair.eval(0.0);
        assert!((pair.phi.at(i, j) - c(center)).norm() < 1e-14);
        for k in 0..g.node_count() {
            let [x, y] = g.coords(k);
            if x.abs() >= 0.25 || y >= 0.25 {
                assert_eq!(pair.phi.values()[k], c(0.0));
                assert_eq!(pair.psi.values()[k], c(0.0));
            }
        }
        for k in g.face_nodes(Face::Bottom) {
            assert_eq!(pair.u3.values()[k], pair.phi.values()[k]);
        }
    }

    #[test]
    fn corrector_vanishes_on_boundary_and_shrinks() {
        let g = Grid::unit_model(257, 129).unwrap();
        let sigma =
            ConductivitySolver::from_corner_weights(&g, vec![1.0; 4 * g.cell_count()]).unwrap();
        let b = ProbeBuilder::new(ProbeFrame::default(), &sigma, Normalization::Calibrated).unwrap();
        let mut ratios = Vec::new();
        let mut bands = Vec::new();
        for (m, n) in MNSchedule::default().points() {
            let p = b.u_m(m, n).unwrap();
            for k in g.face_nodes(Face::Bottom) {
                assert_eq!(p.corrector.values()[k], c(0.0));
            }
            let e1 = sigma.pair(&p.corrector, &p.corrector).re;
            let e0 = sigma.pair(&p.approx, &p.approx).re;
            ratios.push(e1 / e0);
            // scaling band for M N^-1 int |grad w0|^2
            let band = m / n * e0 / ProbeFrame::default().c_eta();
            bands.push(band);
        }
        for w in ratios.windows(2) {
            assert!(w[1] < w[0], "{ratios:?}");
        }
        // M N^-1 int |grad w0|^2 / c_eta approaches 1 from above
        for w in bands.windows(2) {
            assert!(w[1] < w[0] && w[1] > 1.0, "{bands:?}");
        }
    }

    #[test]
    fn schedule_truncation() {
        let g = Grid::unit_model(65, 33).unwrap();
        let pts = MNSchedule::default().resolve(&g, &ProbeFrame::default());
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().any(|p| !p.kept));
        assert!(pts.iter().filter(|p| !p.kept).all(|p| p.reason.is_some()));
        let g = Grid::unit_model(257, 129).unwrap();
        assert!(MNSchedule::default()
            .resolve(&g, &ProbeFrame::default())
            .iter()
            .all(|p| p.kept));
    }
}
