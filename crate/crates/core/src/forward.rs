//! Forward solvers: the conductivity equation `div(σ grad u) = 0`, its
//! zero-boundary correctors, and the perturbed p-Laplace problem
//! `div((σ + γ|grad u|^(p-2)) grad u) = 0`.
//!
//! Everything is discretized with the corner-triangle form of
//! [`crate::grid::CornerGradients`]: the discrete nonlinear problem is the
//! exact minimization of
//! `E(u) = sum_c w [σ_c/2 |g_c|^2 + γ_c/p ((|g_c|^2 + δ^2)^(p/2) - δ^p)]`
//! over fields with the prescribed boundary values.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::coefficients::{sample_real, validate_bounds, ProblemCoefficients};
use crate::error::{Error, Result};
use crate::grid::{nodal_to_corners, CornerGradients, DirichletData, Grid, ScalarField};
use crate::linalg::{dirichlet_rhs, pcg, BandCholesky, EdgeOperator, Jacobi, Preconditioner};

/// Relative residual targeted by every linear conductivity solve.
pub const LINEAR_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Gradient regularization; `None` picks `1e-8` for `p > 2` and `1e-4`
    /// for `p < 2`.
    pub delta: Option<f64>,
    /// Initial damping of the Picard update, in `(0, 1]`.
    pub theta: f64,
    /// Target for the relative nonlinear residual.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            delta: None,
            theta: 1.0,
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

impl SolverOptions {
    pub fn delta_for(&self, p: f64) -> f64 {
        self.delta
            .unwrap_or(if p < 2.0 { 1e-4 } else { 1e-8 })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn validate(&self, p: f64) -> Result<()> {
        let delta = self.delta_for(p);
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidInput(format!("regularization {delta} must be >= 0")));
        }
        if p < 2.0 && delta == 0.0 {
            return Err(Error::SingularWeight(
                "p < 2 requires a positive gradient regularization".into(),
            ));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidInput(format!("damping {} must lie in (0, 1]", self.theta)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub energy: f64,
    /// Total preconditioned CG iterations over all Picard steps.
    pub linear_iterations: usize,
}

fn real_positive(field: &ScalarField, what: &str) -> Result<Vec<f64>> {
    field
        .values()
        .iter()
        .map(|v| {
            if v.im != 0.0 || !(v.re > 0.0) || !v.re.is_finite() {
                Err(Error::InvalidInput(format!("{what} must be real and positive, found {v}")))
            } else {
                Ok(v.re)
            }
        })
        .collect()
}

/// Linear conductivity solver with a cached factorization.
#[derive(Clone, Debug)]
pub struct ConductivitySolver {
    op: EdgeOperator,
    factor: Arc<BandCholesky>,
    sigma_corners: Vec<f64>,
}

impl ConductivitySolver {
    pub fn new(sigma: &ScalarField) -> Result<Self> {
        let g = *sigma.grid();
        let s = real_positive(sigma, "conductivity")?;
        Self::from_corner_weights(&g, nodal_to_corners(&s, &g))
    }

    pub fn from_corner_weights(g: &Grid, sigma_corners: Vec<f64>) -> Result<Self> {
        let op = EdgeOperator::from_corner_weights(g, &sigma_corners);
        let factor = Arc::new(BandCholesky::factor(&op)?);
        Ok(Self {
            op,
            factor,
            sigma_corners,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }
    pub fn operator(&self) -> &EdgeOperator {
        &self.op
    }
    pub fn factor(&self) -> Arc<BandCholesky> {
        Arc::clone(&self.factor)
    }
    pub fn sigma_corners(&self) -> &[f64] {
        &self.sigma_corners
    }

    fn solve_interior(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        let mut x = vec![C64::new(0.0, 0.0); rhs.len()];
        pcg(
            &self.op,
            rhs,
            &mut x,
            self.factor.as_ref(),
            LINEAR_TOLERANCE,
            100,
            0.0,
        )?;
        Ok(x)
    }

    /// Solution of `div(σ grad u) = 0` with `u = f` on the boundary.
    pub fn solve(&self, f: &DirichletData) -> Result<ScalarField> {
        let lift = f.lift().values();
        let mut x = self.solve_interior(&dirichlet_rhs(&self.op, lift))?;
        let g = *self.grid();
        for (k, v) in x.iter_mut().enumerate() {
            let (i, j) = g.ij(k);
            if g.is_boundary(i, j) {
                *v = lift[k];
            }
        }
        ScalarField::new(g, x)
    }

    /// Zero-boundary `w1` with `div(σ grad w1) = -div(σ grad source)`, so that
    /// `source + w1` solves the conductivity equation with the trace of `source`.
    pub fn corrector(&self, source: &ScalarField) -> Result<ScalarField> {
        let g = *self.grid();
        let mut a = vec![C64::new(0.0, 0.0); g.node_count()];
        self.op.apply(source.values(), &mut a);
        for (k, v) in a.iter_mut().enumerate() {
            let (i, j) = g.ij(k);
            *v = if g.is_boundary(i, j) { C64::new(0.0, 0.0) } else { -*v };
        }
        ScalarField::new(g, self.solve_interior(&a)?)
    }

    /// `sum_c w σ_c g_c(u) . conj(g_c(w))`, the discrete `int σ grad u . conj(grad w)`.
    pub fn pair(&self, u: &ScalarField, w: &ScalarField) -> C64 {
        self.op.form(u.values(), w.values())
    }
}

pub fn solve_conductivity(sigma: &ScalarField, f: &DirichletData) -> Result<ScalarField> {
    ConductivitySolver::new(sigma)?.solve(f)
}

pub fn solve_corrector(sigma: &ScalarField, w_source: &ScalarField) -> Result<ScalarField> {
    ConductivitySolver::new(sigma)?.corrector(w_source)
}

/// Per-corner samples of the perturbed p-Laplace problem.
#[derive(Clone, Debug)]
pub struct NonlinearProblem {
    grid: Grid,
    sigma: Vec<f64>,
    gamma: Vec<f64>,
    p: f64,
    delta: f64,
}

impl NonlinearProblem {
    pub fn new(grid: Grid, sigma_nodal: &[f64], gamma_nodal: &[f64], p: f64, delta: f64) -> Self {
        Self {
            grid,
            sigma: nodal_to_corners(sigma_nodal, &grid),
            gamma: nodal_to_corners(gamma_nodal, &grid),
            p,
            delta,
        }
    }

    /// Samples validated coefficients; fails on bound violations.
    pub fn from_coefficients(
        grid: &Grid,
        c: &ProblemCoefficients,
        opts: &SolverOptions,
    ) -> Result<Self> {
        validate_bounds(c, grid)?;
        opts.validate(c.p)?;
        Ok(Self::new(
            *grid,
            &sample_real(&c.sigma, grid),
            &sample_real(&c.gamma, grid),
            c.p,
            opts.delta_for(c.p),
        ))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn sigma_corners(&self) -> &[f64] {
        &self.sigma
    }
    pub fn gamma_corners(&self) -> &[f64] {
        &self.gamma
    }

    /// Effective conductivity `σ + γ(|g|^2 + δ^2)^((p-2)/2)` per corner.
    pub fn effective_conductivity(&self, grads: &CornerGradients) -> Vec<f64> {
        let e = 0.5 * (self.p - 2.0);
        let d2 = self.delta * self.delta;
        grads
            .norm_sqr()
            .into_iter()
            .zip(self.sigma.iter().zip(&self.gamma))
            .map(|(n2, (s, g))| s + g * weight_pow(n2 + d2, e))
            .collect()
    }

    pub fn energy(&self, u: &ScalarField) -> f64 {
        let grads = CornerGradients::of(u);
        let p = self.p;
        let d2 = self.delta * self.delta;
        let dp = self.delta.powf(p);
        let w = self.grid.corner_weight();
        grads
            .norm_sqr()
            .into_iter()
            .zip(self.sigma.iter().zip(&self.gamma))
            .map(|(n2, (s, g))| 0.5 * s * n2 + g / p * ((n2 + d2).powf(0.5 * p) - dp))
            .sum::<f64>()
            * w
    }

    /// `sum_c w κ_c(u) g_c(u) . conj(g_c(w))`: the discrete weak flux of `u`
    /// tested against `w`.
    pub fn flux_pairing(&self, u: &ScalarField, w: &ScalarField) -> C64 {
        let gu = CornerGradients::of(u);
        let kappa = self.effective_conductivity(&gu);
        crate::grid::corner_form(&kappa, &gu, &CornerGradients::of(w))
    }
}

#[inline]
fn weight_pow(base: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if base == 0.0 {
        if e > 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        base.powf(e)
    }
}

fn interior_norm(g: &Grid, v: &[C64]) -> f64 {
    let mut s = 0.0;
    for j in 1..g.ny() - 1 {
        for i in 1..g.nx() - 1 {
            s += v[g.index(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Damped Picard solver for the perturbed p-Laplace problem. Each step
/// freezes the effective conductivity at the current iterate, solves the
/// frozen conductivity problem, and moves toward its solution. The damping
/// factor minimizes the energy along that direction within `(0, theta]`,
/// and is halved further if the energy would still increase.
#[derive(Clone, Debug)]
pub struct PicardSolver {
    problem: NonlinearProblem,
    opts: SolverOptions,
    base: ConductivitySolver,
}

impl PicardSolver {
    pub fn new(problem: NonlinearProblem, opts: SolverOptions) -> Result<Self> {
        opts.validate(problem.p)?;
        let base = ConductivitySolver::from_corner_weights(&problem.grid, problem.sigma.clone())?;
        Ok(Self {
            problem,
            opts,
            base,
        })
    }

    /// Reuses an existing σ-solver as preconditioner and initial guess.
    pub fn with_base(
        problem: NonlinearProblem,
        opts: SolverOptions,
        base: ConductivitySolver,
    ) -> Result<Self> {
        opts.validate(problem.p)?;
        Ok(Self {
            problem,
            opts,
            base,
        })
    }

    pub fn problem(&self) -> &NonlinearProblem {
        &self.problem
    }
    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }
    pub fn base(&self) -> &ConductivitySolver {
        &self.base
    }

    fn residual_vector(&self, u: &ScalarField) -> (Vec<f64>, Vec<C64>) {
        let g = self.problem.grid;
        let kappa = self.problem.effective_conductivity(&CornerGradients::of(u));
        let op = EdgeOperator::from_corner_weights(&g, &kappa);
        let mut r = vec![C64::new(0.0, 0.0); g.node_count()];
        op.apply(u.values(), &mut r);
        for (k, v) in r.iter_mut().enumerate() {
            let (i, j) = g.ij(k);
            *v = if g.is_boundary(i, j) { C64::new(0.0, 0.0) } else { -*v };
        }
        (kappa, r)
    }

    /// Directional derivative of the energy at `u + t d` along `d`.
    fn slope(&self, u: &ScalarField, d: &ScalarField, t: f64) -> f64 {
        self.problem
            .flux_pairing(&u.axpy(C64::new(t, 0.0), d), d)
            .re
    }

    /// Damping in `(0, cap]` minimizing the (convex) energy along `d`.
    fn line_search(&self, u: &ScalarField, d: &ScalarField, cap: f64) -> f64 {
        let s0 = self.slope(u, d, 0.0);
        if !(s0 < 0.0) {
            return cap;
        }
        let s1 = self.slope(u, d, cap);
        if s1 <= 0.0 {
            return cap;
        }
        // Illinois regula falsi on the slope
        let (mut a, mut fa, mut b, mut fb) = (0.0, s0, cap, s1);
        let mut side = 0;
        for _ in 0..30 {
            let t = (a * fb - b * fa) / (fb - fa);
            let ft = self.slope(u, d, t);
            if ft == 0.0 {
                return t;
            }
            if ft < 0.0 {
                a = t;
                fa = ft;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = t;
                fb = ft;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
            if b - a <= 1e-4 * b {
                break;
            }
        }
        0.5 * (a + b)
    }

    pub fn solve(&self, f: &DirichletData) -> Result<(ScalarField, SolveReport)> {
        self.solve_from(f, None)
    }

    /// Solves starting from `guess` (its boundary values are replaced by `f`).
    pub fn solve_from(
        &self,
        f: &DirichletData,
        guess: Option<&ScalarField>,
    ) -> Result<(ScalarField, SolveReport)> {
        let g = self.problem.grid;
        if f.grid() != &g {
            return Err(Error::InvalidInput("boundary data on a different grid".into()));
        }
        if f.is_zero() {
            let u = ScalarField::zeros(g);
            return Ok((
                u,
                SolveReport {
                    iterations: 0,
                    residual: 0.0,
                    converged: true,
                    energy: 0.0,
                    linear_iterations: 0,
                },
            ));
        }
        let lift = f.lift().values();
        let mut u = match guess {
            Some(v) => {
                let mut vals = v.values().to_vec();
                for (k, x) in vals.iter_mut().enumerate() {
                    let (i, j) = g.ij(k);
                    if g.is_boundary(i, j) {
                        *x = lift[k];
                    }
                }
                ScalarField::new(g, vals)?
            }
            None => self.base.solve(f)?,
        };

        // residual scale: response of the frozen operator to the boundary lift
        let scale = {
            let kappa = self.problem.effective_conductivity(&CornerGradients::of(f.lift()));
            let op = EdgeOperator::from_corner_weights(&g, &kappa);
            let s = interior_norm(&g, &dirichlet_rhs(&op, lift));
            if s > 0.0 {
                s
            } else {
                1.0
            }
        };

        let mut energy = self.problem.energy(&u);
        let mut linear_iterations = 0;
        let (mut kappa, mut r) = self.residual_vector(&u);
        let mut residual = interior_norm(&g, &r) / scale;
        let theta = self.opts.theta;
        let mut own_factor: Option<BandCholesky> = None;
        for it in 0..self.opts.max_iterations {
            if residual <= self.opts.tolerance {
                return Ok((
                    u,
                    SolveReport {
                        iterations: it,
                        residual,
                        converged: true,
                        energy,
                        linear_iterations,
                    },
                ));
            }
            let op = EdgeOperator::from_corner_weights(&g, &kappa);
            let mut d = vec![C64::new(0.0, 0.0); g.node_count()];
            let pre: &dyn Preconditioner = match &own_factor {
                Some(fac) => fac,
                None => self.base.factor.as_ref(),
            };
            let stats = match pcg(&op, &r, &mut d, pre, 1e-8, 60, 0.0) {
                Ok(s) => s,
                Err(_) => {
                    // frozen operator too far from σ: factor it directly
                    let fac = BandCholesky::factor(&op)?;
                    d.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                    let s = pcg(&op, &r, &mut d, &fac, 1e-8, 60, 0.0)
                        .or_else(|_| {
                            d.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                            pcg(&op, &r, &mut d, &Jacobi::new(&op), 1e-8, 20_000, 0.0)
                        })?;
                    own_factor = Some(fac);
                    s
                }
            };
            linear_iterations += stats.iterations;

            let dir = ScalarField::new(g, d)?;
            let step = self.line_search(&u, &dir, theta);
            let mut step = step;
            let mut accepted = None;
            for _ in 0..40 {
                let cand = u.axpy(C64::new(step, 0.0), &dir);
                let e = self.problem.energy(&cand);
                if e <= energy + 1e-14 * energy.abs() {
                    accepted = Some((cand, e));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, e)) = accepted else {
                // no decrease representable in floating point
                return Err(Error::NonConvergence {
                    iterations: it + 1,
                    residual,
                });
            };
            u = cand;
            energy = e;
            let next = self.residual_vector(&u);
            kappa = next.0;
            r = next.1;
            residual = interior_norm(&g, &r) / scale;
        }
        if residual <= self.opts.tolerance {
            return Ok((
                u,
                SolveReport {
                    iterations: self.opts.max_iterations,
                    residual,
                    converged: true,
                    energy,
                    linear_iterations,
                },
            ));
        }
        Err(Error::NonConvergence {
            iterations: self.opts.max_iterations,
            residual,
        })
    }
}

/// One-shot nonlinear solve with validated coefficients.
pub fn solve_perturbed_plaplace(
    g: &Grid,
    c: &ProblemCoefficients,
    f: &DirichletData,
    opts: &SolverOptions,
) -> Result<(ScalarField, SolveReport)> {
    let problem = NonlinearProblem::from_coefficients(g, c, opts)?;
    PicardSolver::new(problem, *opts)?.solve(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn ones(g: &Grid) -> ScalarField {
        ScalarField::constant(*g, c(1.0))
    }

    #[test]
    fn conductivity_reproduces_affine() {
        let g = Grid::unit_model(17, 9).unwrap();
        let f = DirichletData::from_fn(g, |x, _| c(x));
        let u = solve_conductivity(&ones(&g), &f).unwrap();
        assert!(u.max_abs_diff(&g.sample_real(|x, _| x)) < 1e-12);
    }

    #[test]
    fn conductivity_constant_flux_profile() {
        let mut errs = Vec::new();
        for n in [17, 33, 65] {
            let g = Grid::unit_model(n, n).unwrap();
            let sigma = g.sample_real(|_, y| y.exp());
            let exact = g.sample_real(|_, y| (-y).exp());
            let u = solve_conductivity(&sigma, &DirichletData::from_field(&exact)).unwrap();
            errs.push(u.max_abs_diff(&exact));
        }
        // arithmetic-mean edge weights make this profile discretely exact
        assert!(errs.iter().all(|&e| e < 1e-12), "{errs:?}");
    }

    #[test]
    fn conductivity_harmonic_second_order() {
        let mut errs = Vec::new();
        for n in [9, 17, 33, 65] {
            let g = Grid::unit_model(2 * n - 1, n).unwrap();
            let exact = g.sample_real(|x, y| (x * x - y * y) + (2.0 * x).exp() * (2.0 * y).cos());
            let u = solve_conductivity(&ones(&g), &DirichletData::from_field(&exact)).unwrap();
            errs.push(u.max_abs_diff(&exact));
        }
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!(slope > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn corrector_of_exact_solution_vanishes() {
        let g = Grid::unit_model(17, 9).unwrap();
        let w = solve_corrector(&ones(&g), &g.sample_real(|x, y| 2.0 * x - y)).unwrap();
        assert!(w.max_abs() < 1e-12);
    }

    #[test]
    fn corrector_keeps_even_symmetry() {
        let g = Grid::unit_model(21, 11).unwrap();
        let sigma = g.sample_real(|x, y| 1.0 + 0.3 * x * x + y);
        let src = g.sample(|x, y| C64::new((3.0 * x).cos() * (-y).exp(), x * x * y));
        let w = solve_corrector(&sigma, &src).unwrap();
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                assert!((w.at(i, j) - w.at(g.nx() - 1 - i, j)).norm() < 1e-11);
            }
        }
        for k in g.face_nodes(crate::grid::Face::Bottom) {
            assert_eq!(w.values()[k], c(0.0));
        }
    }

    fn unit_problem(g: &Grid, p: f64) -> ProblemCoefficients {
        let _ = g;
        ProblemCoefficients::new("1", "1", p, 0.5, 0.5).unwrap()
    }

    #[test]
    fn nonlinear_affine_exact() {
        let g = Grid::unit_model(33, 17).unwrap();
        let f = DirichletData::from_fn(g, |x, _| c(0.7 * x));
        let (u, rep) =
            solve_perturbed_plaplace(&g, &unit_problem(&g, 3.0), &f, &SolverOptions::default())
                .unwrap();
        assert!(rep.converged);
        assert!(u.max_abs_diff(&g.sample_real(|x, _| 0.7 * x)) < 1e-10);
    }

    #[test]
    fn nonlinear_zero_data() {
        let g = Grid::unit_model(9, 5).unwrap();
        let (u, rep) = solve_perturbed_plaplace(
            &g,
            &unit_problem(&g, 3.0),
            &DirichletData::zeros(g),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert!(rep.converged);
    }

    #[test]
    fn nonlinear_rejects_bound_violation() {
        let g = Grid::unit_model(9, 5).unwrap();
        let c = ProblemCoefficients::new("1", "x1", 3.0, 0.5, 0.5).unwrap();
        let r = solve_perturbed_plaplace(
            &g,
            &c,
            &DirichletData::from_fn(g, |x, _| C64::new(x, 0.0)),
            &SolverOptions::default(),
        );
        assert!(matches!(r, Err(Error::BoundViolation { .. })));
    }

    #[test]
    fn nonlinear_reports_nonconvergence() {
        let g = Grid::unit_model(17, 9).unwrap();
        let c = ProblemCoefficients::new("1", "1 + x2", 4.0, 0.5, 0.4).unwrap();
        let opts = SolverOptions {
            max_iterations: 1,
            tolerance: 1e-14,
            ..Default::default()
        };
        let f = DirichletData::from_fn(g, |x, y| c64(3.0 * x * x - y));
        assert!(matches!(
            solve_perturbed_plaplace(&g, &c, &f, &opts),
            Err(Error::NonConvergence { .. })
        ));
    }

    fn c64(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    fn random_data(g: &Grid, amp: f64) -> DirichletData {
        DirichletData::from_fn(*g, |x, y| {
            C64::new(amp * ((2.0 * x).sin() + y * y), amp * 0.5 * (x * y).cos())
        })
    }

    #[test]
    fn energy_decreases_and_sublinear_branch_converges() {
        let g = Grid::unit_model(33, 17).unwrap();
        for p in [1.5, 3.0, 4.0] {
            let c = ProblemCoefficients::new("1 + 0.2*x1", "1 + x2", p, 0.5, 0.4).unwrap();
            let f = random_data(&g, 2.0);
            let (u, rep) = solve_perturbed_plaplace(&g, &c, &f, &SolverOptions::default()).unwrap();
            assert!(rep.converged, "p = {p}");
            let problem =
                NonlinearProblem::from_coefficients(&g, &c, &SolverOptions::default()).unwrap();
            let start = ConductivitySolver::new(&crate::coefficients::sample(&c.sigma, &g))
                .unwrap()
                .solve(&f)
                .unwrap();
            assert!(problem.energy(&u) <= problem.energy(&start));
        }
    }

    /// Preconditioned steepest descent with exact-ish line search on the
    /// discrete energy, independent of the Picard machinery.
    fn descent_minimum(problem: &NonlinearProblem, f: &DirichletData) -> f64 {
        let g = *problem.grid();
        let base = ConductivitySolver::from_corner_weights(&g, problem.sigma_corners().to_vec())
            .unwrap();
        let mut u = base.solve(f).unwrap();
        let mut e = problem.energy(&u);
        for _ in 0..400 {
            // gradient of E is A(κ(u)) u restricted to the interior
            let kappa = problem.effective_conductivity(&CornerGradients::of(&u));
            let op = EdgeOperator::from_corner_weights(&g, &kappa);
            let mut grad = vec![C64::new(0.0, 0.0); g.node_count()];
            op.apply(u.values(), &mut grad);
            for (k, v) in grad.iter_mut().enumerate() {
                let (i, j) = g.ij(k);
                if g.is_boundary(i, j) {
                    *v = C64::new(0.0, 0.0);
                }
            }
            let mut dir = vec![C64::new(0.0, 0.0); g.node_count()];
            base.factor().apply(&grad, &mut dir);
            let dir = ScalarField::new(g, dir).unwrap();
            // golden-section search on t in [0, 2]
            let phi = |t: f64| problem.energy(&u.axpy(C64::new(-t, 0.0), &dir));
            let (mut a, mut b) = (0.0, 2.0);
            let gr = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..80 {
                let (c1, c2) = (b - gr * (b - a), a + gr * (b - a));
                if phi(c1) < phi(c2) {
                    b = c2;
                } else {
                    a = c1;
                }
            }
            let t = 0.5 * (a + b);
            let cand = u.axpy(C64::new(-t, 0.0), &dir);
            let ne = problem.energy(&cand);
            if ne >= e {
                break;
            }
            u = cand;
            e = ne;
        }
        e
    }

    #[test]
    fn picard_fixed_point_minimizes_energy() {
        let g = Grid::unit_model(17, 9).unwrap();
        for p in [3.0, 4.0] {
            let c = ProblemCoefficients::new("1", "1 + 0.5*x1 + x2", p, 0.5, 0.4).unwrap();
            let f = random_data(&g, 1.5);
            let (_, rep) = solve_perturbed_plaplace(&g, &c, &f, &SolverOptions::default()).unwrap();
            let problem =
                NonlinearProblem::from_coefficients(&g, &c, &SolverOptions::default()).unwrap();
            let emin = descent_minimum(&problem, &f);
            assert!(
                (rep.energy - emin).abs() <= 1e-6 * emin.abs(),
                "p = {p}: {} vs {emin}",
                rep.energy
            );
            assert!(rep.energy <= emin * (1.0 + 1e-12));
        }
    }

    #[test]
    fn complex_data_uses_joint_weight() {
        // u = (1 + i) x1 has |grad u|^2 = 2 and stays affine
        let g = Grid::unit_model(17, 9).unwrap();
        let c = unit_problem(&g, 3.0);
        let f = DirichletData::from_fn(g, |x, _| C64::new(x, x));
        let (u, _) = solve_perturbed_plaplace(&g, &c, &f, &SolverOptions::default()).unwrap();
        assert!(u.max_abs_diff(&g.sample(|x, _| C64::new(x, x))) < 1e-10);
    }
}
