//! Weak Dirichlet-to-Neumann pairings and their small/large-data limits.
//!
//! The nonlinear pairing of data `f` against a test field `w` is
//! `<Λ(f), w> = int (σ + γ|grad u_f|^(p-2)) grad u_f . conj(grad w)`,
//! where `u_f` solves the perturbed p-Laplace problem. Rescaling the data and
//! sending the scale to its limit isolates first the linear map `Λ_σ` and
//! then the leading nonlinear functional `I(u_0, w)`.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::coefficients::ProblemCoefficients;
use crate::error::{Error, Result};
use crate::forward::{
    ConductivitySolver, NonlinearProblem, PicardSolver, SolveReport, SolverOptions,
};
use crate::grid::{CornerGradients, DirichletData, Grid, ScalarField};
use crate::limit::{extrapolate, LimitSeries};
use crate::linalg::EdgeOperator;

const CACHE_CAPACITY: usize = 32;

/// Measurement oracle for hidden coefficients.
///
/// The coefficients cannot be read back; the only measurement channel is
/// [`DnOracle::pair_nonlinear`].
///
/// ```compile_fail
/// # use plap_recon::{grid::Grid, coefficients::ProblemCoefficients, dn_map::DnOracle};
/// # use plap_recon::forward::SolverOptions;
/// let g = Grid::unit_model(9, 5).unwrap();
/// let c = ProblemCoefficients::new("1", "1", 3.0, 0.5, 0.5).unwrap();
/// let o = DnOracle::new(g, c, SolverOptions::default()).unwrap();
/// let leaked = o.coefficients;
/// ```
pub struct DnOracle {
    grid: Grid,
    coefficients: ProblemCoefficients,
    problem: NonlinearProblem,
    opts: SolverOptions,
    base: OnceLock<ConductivitySolver>,
    cache: Mutex<SolutionCache>,
}

#[derive(Default)]
struct SolutionCache {
    map: HashMap<u64, Arc<(ScalarField, SolveReport)>>,
    order: VecDeque<u64>,
    solves: usize,
    hits: usize,
}

impl std::fmt::Debug for DnOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DnOracle")
            .field("grid", &self.grid)
            .field("p", &self.coefficients.p)
            .finish_non_exhaustive()
    }
}

impl DnOracle {
    pub fn new(grid: Grid, coefficients: ProblemCoefficients, opts: SolverOptions) -> Result<Self> {
        let problem = NonlinearProblem::from_coefficients(&grid, &coefficients, &opts)?;
        Ok(Self {
            grid,
            coefficients,
            problem,
            opts,
            base: OnceLock::new(),
            cache: Mutex::new(SolutionCache::default()),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The exponent is part of the model, not of the unknowns.
    pub fn exponent(&self) -> f64 {
        self.coefficients.p
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    /// Number of forward solves performed and cache hits served.
    pub fn statistics(&self) -> (usize, usize) {
        let c = self.cache.lock().unwrap();
        (c.solves, c.hits)
    }

    fn base(&self) -> Result<&ConductivitySolver> {
        if let Some(b) = self.base.get() {
            return Ok(b);
        }
        let b = ConductivitySolver::from_corner_weights(
            &self.grid,
            self.problem.sigma_corners().to_vec(),
        )?;
        Ok(self.base.get_or_init(|| b))
    }

    fn solution(&self, f: &DirichletData) -> Result<Arc<(ScalarField, SolveReport)>> {
        let key = f.content_hash();
        {
            let mut c = self.cache.lock().unwrap();
            if let Some(hit) = c.map.get(&key).cloned() {
                c.hits += 1;
                return Ok(hit);
            }
        }
        let solver = PicardSolver::with_base(self.problem.clone(), self.opts, self.base()?.clone())?;
        let sol = Arc::new(solver.solve(f)?);
        let mut c = self.cache.lock().unwrap();
        c.solves += 1;
        if c.map.len() >= CACHE_CAPACITY {
            if let Some(old) = c.order.pop_front() {
                c.map.remove(&old);
            }
        }
        c.order.push_back(key);
        c.map.insert(key, Arc::clone(&sol));
        Ok(sol)
    }

    /// `<Λ(f), w>` for the hidden coefficients.
    pub fn pair_nonlinear(&self, f: &DirichletData, w: &ScalarField) -> Result<C64> {
        if f.grid() != &self.grid || w.grid() != &self.grid {
            return Err(Error::InvalidInput("field on a different grid".into()));
        }
        let sol = self.solution(f)?;
        Ok(self.problem.flux_pairing(&sol.0, w))
    }
}

/// `int σ grad u0 . conj(grad w)` in the corner quadrature.
pub fn pair_linear(u0: &ScalarField, sigma: &ScalarField, w: &ScalarField) -> C64 {
    let s: Vec<f64> = sigma.values().iter().map(|v| v.re).collect();
    EdgeOperator::from_nodal(u0.grid(), &s).form(u0.values(), w.values())
}

/// Geometric scale schedule `ε_k = ε_0 r^k`, `k < count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self {
            eps0: 0.1,
            ratio: 0.5,
            count: 6,
        }
    }
}

impl EpsSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::InvalidInput(format!("eps0 = {} must be positive", self.eps0)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidInput(format!("ratio = {} must lie in (0, 1)", self.ratio)));
        }
        if self.count < 4 {
            return Err(Error::InvalidInput("an eps schedule needs at least 4 points".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.eps0 * self.ratio.powi(k as i32))
            .collect()
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p == 2.0 {
        return Err(Error::InvalidInput(
            "the eps-limits need p != 2".into(),
        ));
    }
    Ok(())
}

/// Data scale and prefactor of the linear extraction at scale `ε`.
fn linear_scaling(p: f64, eps: f64) -> (f64, f64) {
    if p > 2.0 {
        (eps, 1.0 / eps)
    } else {
        (1.0 / eps, eps)
    }
}

/// Raw values `ε^{-1} <Λ(εf), w>` (`p > 2`) or `ε <Λ(f/ε), w>` (`p < 2`).
pub fn linear_dn_points(
    o: &DnOracle,
    f: &DirichletData,
    w: &ScalarField,
    s: &EpsSchedule,
) -> Result<Vec<(f64, C64)>> {
    let p = o.exponent();
    check_exponent(p)?;
    s.validate()?;
    s.values()
        .into_iter()
        .map(|eps| {
            let (scale, pre) = linear_scaling(p, eps);
            let v = o.pair_nonlinear(&f.scale(C64::new(scale, 0.0)), w)?;
            Ok((eps, v * pre))
        })
        .collect()
}

/// Series converging to `<Λ_σ f, w>` with order `|p - 2|`.
pub fn extract_linear_dn(
    o: &DnOracle,
    f: &DirichletData,
    w: &ScalarField,
    s: &EpsSchedule,
) -> Result<LimitSeries> {
    let pts = linear_dn_points(o, f, w, s)?;
    extrapolate(&pts, Some((o.exponent() - 2.0).abs()))
}

/// Raw values of the scaled remainder whose limit is `I(u_0, w)`:
/// `ε^{1-p}(<Λ(εf), w> - ε L)` for `p > 2` and
/// `ε^{p-1}(<Λ(f/ε), w> - L/ε)` for `p < 2`, with `L = <Λ_σ f, w>` from the
/// known conductivity.
pub fn i_points(
    o: &DnOracle,
    known_sigma: &ConductivitySolver,
    f: &DirichletData,
    w: &ScalarField,
    s: &EpsSchedule,
) -> Result<Vec<(f64, C64)>> {
    let p = o.exponent();
    check_exponent(p)?;
    s.validate()?;
    let u0 = known_sigma.solve(f)?;
    let lin = known_sigma.pair(&u0, w);
    s.values()
        .into_iter()
        .map(|eps| {
            let (scale, _) = linear_scaling(p, eps);
            let v = o.pair_nonlinear(&f.scale(C64::new(scale, 0.0)), w)?;
            let rem = v - lin * scale;
            Ok((eps, rem / scale.powf(p - 1.0)))
        })
        .collect()
}

pub fn extract_i(
    o: &DnOracle,
    known_sigma: &ConductivitySolver,
    f: &DirichletData,
    w: &ScalarField,
    s: &EpsSchedule,
) -> Result<LimitSeries> {
    let pts = i_points(o, known_sigma, f, w, s)?;
    extrapolate(&pts, Some((o.exponent() - 2.0).abs()))
}

/// `||a|^(p-2) a - |b|^(p-2) b| / ((|a| + |b|)^(p-2) |a - b|)` for complex
/// 2-vectors.
pub fn monotonicity_ratio(a: [C64; 2], b: [C64; 2], p: f64) -> f64 {
    let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
    let nb = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
    let (wa, wb) = (na.powf(p - 2.0), nb.powf(p - 2.0));
    let num = ((a[0] * wa - b[0] * wb).norm_sqr() + (a[1] * wa - b[1] * wb).norm_sqr()).sqrt();
    let diff = ((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt();
    num / ((na + nb).powf(p - 2.0) * diff)
}

/// Largest [`monotonicity_ratio`] over `samples` seeded random pairs whose
/// components are drawn with log-uniform magnitudes.
pub fn sample_monotonicity_ratio(p: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> [C64; 2] {
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let mut c = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
        [c(), c()]
    };
    let mut max: f64 = 0.0;
    for k in 0..samples {
        let a = draw(&mut rng);
        let b = if k % 4 == 0 {
            // nearby pairs probe the derivative bound
            let d = draw(&mut rng);
            let t = 1e-3;
            [a[0] + d[0] * t, a[1] + d[1] * t]
        } else {
            draw(&mut rng)
        };
        let r = monotonicity_ratio(a, b, p);
        if r.is_finite() {
            max = max.max(r);
        }
    }
    max
}

/// Discrete `|grad u|` per corner for diagnostics.
pub fn corner_gradient_norms(u: &ScalarField) -> Vec<f64> {
    CornerGradients::of(u)
        .norm_sqr()
        .into_iter()
        .map(f64::sqrt)
        .collect()
}
