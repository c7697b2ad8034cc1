//! Config-driven pipelines and their artifacts: a JSON summary and a CSV of
//! the per-point series.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::coefficients::{sample, validate_bounds, BoundsReport};
use crate::config::{ExperimentConfig, Pipeline, RunMode};
use crate::dn_map::{
    extract_i, extract_linear_dn, pair_linear, sample_monotonicity_ratio, DnOracle,
};
use crate::error::{Error, Result};
use crate::expr::CoeffExpr;
use crate::forward::{solve_perturbed_plaplace, ConductivitySolver, SolveReport};
use crate::functionals::{eval_i, eval_j1, eval_j2, eval_k, IEvaluator, SolutionTriple};
use crate::grid::{DirichletData, Grid, ScalarField};
use crate::limit::LimitSeries;
use crate::probes::{ProbeFrame, SchedulePoint};
use crate::reconstruct::{
    reconstruct_dn_gamma_at, reconstruct_gamma_at, reconstruct_sigma_at, ConductivityOracle,
    ExtractedLinearDn, LinearDn, ReconstructionReport,
};

/// Relative error budgets of the recovered values.
pub const SIGMA_BUDGET: f64 = 0.02;
pub const GAMMA_BUDGET_ORACLE: f64 = 0.05;
pub const GAMMA_BUDGET_INVERSE: f64 = 0.10;
pub const DGAMMA_BUDGET: f64 = 0.10;
/// Finite-difference versus direct agreement of `J1`, `J2`.
pub const J_BUDGET: f64 = 1e-4;
/// Agreement of the two formulas for `K` in oracle mode.
pub const K_BUDGET: f64 = 1e-6;

/// Boundary data of `(u1, u2, u3)` for the identity suite; `u2` and `u3`
/// are given as (real, imaginary) parts.
pub const IDENTITY_INSTANCES: [(&str, [&str; 2], [&str; 2]); 5] = [
    ("x1", ["x2", "x1"], ["x1*x2", "0.5*x1"]),
    ("x1 + 0.2*x2", ["x1*x2", "x2"], ["x1", "x1*x1 - x2*x2"]),
    ("0.5 + x1 - 0.3*x2", ["exp(x1)*cos(x2)", "exp(x1)*sin(x2)"], ["x2", "x1 + x2"]),
    ("2*x1 + x2", ["x1*x1 - x2*x2", "x2"], ["sin(x1)", "cos(x2)"]),
    ("0.5*x2 - x1", ["sin(x1)", "cos(x2)"], ["exp(x1)*cos(x2)", "x1*x2"]),
];

/// One CSV row: `parameter, raw_value_re, raw_value_im, fitted_model, residual`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub parameter: f64,
    pub raw_value_re: f64,
    pub raw_value_im: f64,
    /// Real part of the fitted model at the parameter.
    pub fitted_model: f64,
    /// `|raw - fitted|`.
    pub residual: f64,
}

impl CsvRow {
    fn from_series(s: &LimitSeries) -> Vec<Self> {
        s.points
            .iter()
            .zip(s.fitted())
            .map(|(&(t, v), f)| Self {
                parameter: t,
                raw_value_re: v.re,
                raw_value_im: v.im,
                fitted_model: f.re,
                residual: (v - f).norm(),
            })
            .collect()
    }
}

/// One identity-suite row: a functional at one instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityRow {
    pub functional: String,
    pub instance: usize,
    pub oracle_re: f64,
    pub oracle_im: f64,
    pub direct_re: f64,
    pub direct_im: f64,
    pub inverse_re: Option<f64>,
    pub inverse_im: Option<f64>,
    pub relative_gap: f64,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSummary {
    pub x_min: f64,
    pub x_max: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl From<&Grid> for GridSummary {
    fn from(g: &Grid) -> Self {
        Self {
            x_min: g.x_min(),
            x_max: g.x_max(),
            height: g.height(),
            nx: g.nx(),
            ny: g.ny(),
            hx: g.hx(),
            hy: g.hy(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recovered {
    pub name: String,
    pub value: f64,
    pub budget: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_budget: Option<bool>,
    /// Largest fit residual of the series behind the value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForwardSummary {
    pub solve: SolveReport,
    pub bounds: BoundsReport,
    /// `<Λ(f), f>`.
    pub pairing: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DnCheckSummary {
    pub linear: LimitSeries,
    pub linear_direct: C64,
    pub linear_relative_gap: f64,
    pub remainder: LimitSeries,
    pub remainder_direct: C64,
    pub remainder_relative_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub pipeline: String,
    pub mode: String,
    pub grid: GridSummary,
    pub recovered: Vec<Recovered>,
    pub reports: Vec<ReconstructionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forward: Option<ForwardSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dn_check: Option<DnCheckSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub identities: Vec<IdentityRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotonicity_ratio: Option<f64>,
    pub elapsed_seconds: f64,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.recovered.iter().all(|r| r.within_budget != Some(false))
            && self.identities.iter().all(|r| r.relative_gap <= r.budget)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: Summary,
    pub rows: Vec<CsvRow>,
}

impl RunOutput {
    /// Writes `summary.json`, `series.csv` and, for the identity suite,
    /// `identities.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let path = dir.join("summary.json");
        let json = serde_json::to_string_pretty(&self.summary)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        fs::write(&path, json + "\n")?;
        written.push(path);
        let path = dir.join("series.csv");
        fs::write(&path, csv_text(&self.rows)?)?;
        written.push(path);
        if !self.summary.identities.is_empty() {
            let path = dir.join("identities.csv");
            fs::write(&path, csv_text(&self.summary.identities)?)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// CSV text with a header row.
pub fn csv_text<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

fn mode_name(m: RunMode) -> &'static str {
    match m {
        RunMode::Oracle => "oracle",
        RunMode::Inverse => "inverse",
    }
}

fn data_of(expr: &CoeffExpr, g: &Grid) -> DirichletData {
    DirichletData::from_fn(*g, |x, y| C64::new(expr.eval(x, y), 0.0))
}

fn complex_data(parts: [&str; 2], g: &Grid) -> Result<DirichletData> {
    let re = CoeffExpr::parse(parts[0])?;
    let im = CoeffExpr::parse(parts[1])?;
    Ok(DirichletData::from_fn(*g, |x, y| {
        C64::new(re.eval(x, y), im.eval(x, y))
    }))
}

/// Ground truth of the three reconstructed quantities at `x0`.
pub struct Truth {
    pub sigma: f64,
    pub gamma: f64,
    pub dgamma: f64,
}

impl Truth {
    pub fn of(c: &ExperimentConfig, frame: &ProbeFrame) -> Result<Self> {
        let k = c.coefficients()?;
        let [a, b] = frame.x0;
        let d = 1e-6;
        Ok(Self {
            sigma: k.sigma.eval(a, b),
            gamma: k.gamma.eval(a, b),
            dgamma: (k.gamma.eval(a, b + d) - k.gamma.eval(a, b - d)) / (2.0 * d),
        })
    }
}

fn recovered(name: &str, r: &ReconstructionReport, budget: f64, absolute_floor: f64) -> Recovered {
    let within = r.ground_truth.map(|t| {
        let tol = (budget * t.abs()).max(absolute_floor);
        (r.value - t).abs() <= tol
    });
    Recovered {
        name: name.into(),
        value: r.value,
        budget,
        ground_truth: r.ground_truth,
        within_budget: within,
        fit_residual: Some(r.series.fit.residual),
    }
}

struct Context {
    config: ExperimentConfig,
    grid: Grid,
    frame: ProbeFrame,
}

impl Context {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let frame = config.frame();
        frame.validate(&grid)?;
        Ok(Self {
            config: config.clone(),
            grid,
            frame,
        })
    }

    fn mode(&self) -> RunMode {
        self.config.experiment.mode
    }

    fn scored(&self) -> bool {
        self.mode() == RunMode::Oracle || self.config.experiment.score_inverse
    }

    fn sigma_field(&self) -> Result<ScalarField> {
        Ok(sample(&self.config.coefficients()?.sigma, &self.grid))
    }

    fn gamma_field(&self) -> Result<ScalarField> {
        Ok(sample(&self.config.coefficients()?.gamma, &self.grid))
    }

    fn oracle(&self) -> Result<DnOracle> {
        DnOracle::new(self.grid, self.config.coefficients()?, self.config.solver_options())
    }

    fn known(&self) -> Result<ConductivitySolver> {
        ConductivitySolver::new(&self.sigma_field()?)
    }

    fn u1_data(&self) -> Result<DirichletData> {
        Ok(data_of(&self.config.u1_expr()?, &self.grid))
    }
}

/// Runs the configured pipeline.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let ctx = Context::new(config)?;
    let mut summary = Summary {
        pipeline: config.experiment.pipeline.name().into(),
        mode: mode_name(ctx.mode()).into(),
        grid: GridSummary::from(&ctx.grid),
        recovered: Vec::new(),
        reports: Vec::new(),
        forward: None,
        dn_check: None,
        identities: Vec::new(),
        monotonicity_ratio: None,
        elapsed_seconds: 0.0,
    };
    let rows = match config.experiment.pipeline {
        Pipeline::Forward => run_forward(&ctx, &mut summary)?,
        Pipeline::DnCheck => run_dn_check(&ctx, &mut summary)?,
        Pipeline::ReconstructSigma => run_sigma(&ctx, &mut summary)?,
        Pipeline::ReconstructGamma => run_gamma(&ctx, &mut summary)?.1,
        Pipeline::ReconstructDgamma => run_dgamma(&ctx, &mut summary)?,
        Pipeline::IdentitySuite => run_identities(&ctx, &mut summary)?,
    };
    summary.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(RunOutput { summary, rows })
}

fn run_forward(ctx: &Context, s: &mut Summary) -> Result<Vec<CsvRow>> {
    let c = ctx.config.coefficients()?;
    let bounds = validate_bounds(&c, &ctx.grid)?;
    let f = ctx.u1_data()?;
    let opts = ctx.config.solver_options();
    let (u, report) = solve_perturbed_plaplace(&ctx.grid, &c, &f, &opts)?;
    let problem = crate::forward::NonlinearProblem::from_coefficients(&ctx.grid, &c, &opts)?;
    let pairing = problem.flux_pairing(&u, f.lift());
    s.forward = Some(ForwardSummary {
        solve: report,
        bounds,
        pairing,
    });
    Ok(vec![CsvRow {
        parameter: 1.0,
        raw_value_re: pairing.re,
        raw_value_im: pairing.im,
        fitted_model: pairing.re,
        residual: report.residual,
    }])
}

fn relative_gap(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn run_dn_check(ctx: &Context, s: &mut Summary) -> Result<Vec<CsvRow>> {
    let o = ctx.oracle()?;
    let known = ctx.known()?;
    let f = ctx.u1_data()?;
    // the remainder identity needs a conductivity solution as test function
    let w = known.solve(&data_of(&CoeffExpr::parse(&ctx.config.data.test)?, &ctx.grid))?;
    let eps = ctx.config.eps_schedule();
    let linear = extract_linear_dn(&o, &f, &w, &eps)?;
    let u0 = known.solve(&f)?;
    let linear_direct = pair_linear(&u0, &ctx.sigma_field()?, &w);
    let remainder = extract_i(&o, &known, &f, &w, &eps)?;
    let e = IEvaluator::oracle(&ctx.gamma_field()?, ctx.config.coefficients.p);
    let remainder_direct = eval_i(&e, &u0, &w)?;
    let rows = CsvRow::from_series(&linear);
    s.dn_check = Some(DnCheckSummary {
        linear_relative_gap: relative_gap(linear.limit(), linear_direct),
        remainder_relative_gap: relative_gap(remainder.limit(), remainder_direct),
        linear,
        linear_direct,
        remainder,
        remainder_direct,
    });
    Ok(rows)
}

fn run_sigma(ctx: &Context, s: &mut Summary) -> Result<Vec<CsvRow>> {
    let sched = ctx.config.m_schedule();
    let norm = ctx.config.probes.normalization;
    let mut r = match ctx.mode() {
        RunMode::Oracle => {
            let dn = ConductivityOracle::new(&ctx.sigma_field()?)?;
            reconstruct_sigma_at(&dn as &dyn LinearDn, &ctx.frame, &sched, norm)?
        }
        RunMode::Inverse => {
            let o = ctx.oracle()?;
            let dn = ExtractedLinearDn {
                oracle: &o,
                eps: ctx.config.eps_schedule(),
            };
            reconstruct_sigma_at(&dn, &ctx.frame, &sched, norm)?
        }
    };
    if ctx.scored() {
        r.attach_ground_truth(Truth::of(&ctx.config, &ctx.frame)?.sigma);
    }
    s.recovered.push(recovered("sigma", &r, SIGMA_BUDGET, 0.0));
    let rows = CsvRow::from_series(&r.series);
    s.reports.push(r);
    Ok(rows)
}

fn gamma_budget(mode: RunMode) -> f64 {
    match mode {
        RunMode::Oracle => GAMMA_BUDGET_ORACLE,
        RunMode::Inverse => GAMMA_BUDGET_INVERSE,
    }
}

fn run_gamma(ctx: &Context, s: &mut Summary) -> Result<(f64, Vec<CsvRow>)> {
    let known = ctx.known()?;
    let data = ctx.u1_data()?;
    let sched = ctx.config.m_schedule();
    let opts = ctx.config.reconstruction_options();
    let p = ctx.config.coefficients.p;
    let mut r = match ctx.mode() {
        RunMode::Oracle => {
            let e = IEvaluator::oracle(&ctx.gamma_field()?, p);
            reconstruct_gamma_at(&e, &known, &ctx.frame, &data, &sched, &opts)?
        }
        RunMode::Inverse => {
            let o = ctx.oracle()?;
            let e = IEvaluator::inverse(&o, &known, ctx.config.eps_schedule());
            reconstruct_gamma_at(&e, &known, &ctx.frame, &data, &sched, &opts)?
        }
    };
    if ctx.scored() {
        r.attach_ground_truth(Truth::of(&ctx.config, &ctx.frame)?.gamma);
    }
    s.recovered.push(recovered("gamma", &r, gamma_budget(ctx.mode()), 0.0));
    let rows = CsvRow::from_series(&r.series);
    let value = r.value;
    s.reports.push(r);
    Ok((value, rows))
}

fn run_dgamma(ctx: &Context, s: &mut Summary) -> Result<Vec<CsvRow>> {
    let gamma0 = match ctx.config.data.gamma_at_x0 {
        Some(v) => v,
        None => run_gamma(ctx, s)?.0,
    };
    let known = ctx.known()?;
    let data = ctx.u1_data()?;
    let sched = ctx.config.n_schedule();
    let opts = ctx.config.reconstruction_options();
    let p = ctx.config.coefficients.p;
    let mut r = match ctx.mode() {
        RunMode::Oracle => {
            let e = IEvaluator::oracle(&ctx.gamma_field()?, p);
            reconstruct_dn_gamma_at(&e, &known, &ctx.frame, &data, &sched, gamma0, &opts)?
        }
        RunMode::Inverse => {
            let o = ctx.oracle()?;
            let e = IEvaluator::inverse(&o, &known, ctx.config.eps_schedule());
            reconstruct_dn_gamma_at(&e, &known, &ctx.frame, &data, &sched, gamma0, &opts)?
        }
    };
    if ctx.scored() {
        r.attach_ground_truth(Truth::of(&ctx.config, &ctx.frame)?.dgamma);
    }
    let floor = 0.05 * 1.5 * ctx.frame.pair_gradient_energy();
    s.recovered.push(recovered("dgamma", &r, DGAMMA_BUDGET, floor));
    let rows = CsvRow::from_series(&r.series);
    s.reports.push(r);
    Ok(rows)
}

fn identity_row(
    functional: &str,
    instance: usize,
    oracle: C64,
    direct: C64,
    inverse: Option<C64>,
    budget: f64,
) -> IdentityRow {
    IdentityRow {
        functional: functional.into(),
        instance,
        oracle_re: oracle.re,
        oracle_im: oracle.im,
        direct_re: direct.re,
        direct_im: direct.im,
        inverse_re: inverse.map(|v| v.re),
        inverse_im: inverse.map(|v| v.im),
        relative_gap: relative_gap(oracle, direct),
        budget,
    }
}

fn run_identities(ctx: &Context, s: &mut Summary) -> Result<Vec<CsvRow>> {
    let known = ctx.known()?;
    let p = ctx.config.coefficients.p;
    let fd = ctx.config.probes.fd_step;
    let gamma = ctx.gamma_field()?;
    let e = IEvaluator::oracle(&gamma, p);
    let o = match ctx.mode() {
        RunMode::Inverse => Some(ctx.oracle()?),
        RunMode::Oracle => None,
    };
    let inv = o
        .as_ref()
        .map(|o| IEvaluator::inverse(o, &known, ctx.config.eps_schedule()));
    let mut rows = Vec::new();
    for (k, (u1, u2, u3)) in IDENTITY_INSTANCES.iter().enumerate() {
        let u1 = known.solve(&data_of(&CoeffExpr::parse(u1)?, &ctx.grid))?;
        let u2 = known.solve(&complex_data(*u2, &ctx.grid)?)?;
        let u3 = known.solve(&complex_data(*u3, &ctx.grid)?)?;
        let t = SolutionTriple::new(u1.clone(), u2.clone(), u3)?;
        let j1 = eval_j1(&e, &t, fd)?;
        let j2 = eval_j2(&e, &t, fd)?;
        let (i1, i2) = match &inv {
            Some(iv) => (
                Some(eval_j1(iv, &t, fd)?.value),
                Some(eval_j2(iv, &t, fd)?.value),
            ),
            None => (None, None),
        };
        s.identities.push(identity_row("J1", k, j1.finite_difference, j1.value, i1, J_BUDGET));
        s.identities.push(identity_row("J2", k, j2.finite_difference, j2.value, i2, J_BUDGET));
        let tk = SolutionTriple::new(u1, u2.clone(), u2.conj())?;
        let kv = eval_k(&e, &tk, fd)?;
        let ik = match &inv {
            Some(iv) => Some(eval_k(iv, &tk, fd)?.value),
            None => None,
        };
        let beta = kv.beta_form.expect("oracle mode fills the beta form");
        s.identities.push(identity_row("K", k, kv.value, beta, ik, K_BUDGET));
        rows.push(CsvRow {
            parameter: k as f64,
            raw_value_re: kv.value.re,
            raw_value_im: kv.value.im,
            fitted_model: beta.re,
            residual: (kv.value - beta).norm(),
        });
    }
    if p > 2.0 {
        s.monotonicity_ratio = Some(sample_monotonicity_ratio(p, 10_000, ctx.config.experiment.seed));
    }
    Ok(rows)
}

fn write_schedule(out: &mut String, pts: &[SchedulePoint], label_m: bool) {
    for p in pts {
        let head = if label_m {
            format!("M = {:>8.4}  N = {:>8.4}", p.m, p.n)
        } else {
            format!("N = {:>8.4}", p.n)
        };
        let _ = write!(
            out,
            "    {head}  N*h = {:.3}  cells/radius = {:.2}",
            p.phase_per_cell, p.nodes_per_radius
        );
        match &p.reason {
            None => out.push('\n'),
            Some(r) => {
                let _ = writeln!(out, "  DROPPED ({r})");
            }
        }
    }
}

/// The resolved plan of a run, without solving anything.
pub fn describe(config: &ExperimentConfig) -> Result<String> {
    let ctx = Context::new(config)?;
    let g = ctx.grid;
    let c = &config.coefficients;
    let mut out = String::new();
    let _ = writeln!(out, "pipeline: {}", config.experiment.pipeline.name());
    let _ = writeln!(out, "mode: {}", mode_name(ctx.mode()));
    let _ = writeln!(
        out,
        "grid: [{}, {}] x [0, {}] with {} x {} nodes (hx = {:.5}, hy = {:.5})",
        g.x_min(),
        g.x_max(),
        g.height(),
        g.nx(),
        g.ny(),
        g.hx(),
        g.hy()
    );
    let _ = writeln!(
        out,
        "coefficients: sigma = {}, gamma = {}, p = {}",
        c.sigma, c.gamma, c.p
    );
    let _ = writeln!(out, "u1 data: {}", config.data.u1);
    let eps = config.eps_schedule().values();
    let _ = writeln!(
        out,
        "eps schedule ({} points): {}",
        eps.len(),
        eps.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>().join(", ")
    );
    let m = config.m_schedule().resolve(&g, &ctx.frame);
    let _ = writeln!(
        out,
        "M/N schedule ({} points, N = M^{}):",
        m.len(),
        config.schedules.n_exponent
    );
    write_schedule(&mut out, &m, true);
    let n = config.n_schedule().resolve(&g, &ctx.frame);
    let _ = writeln!(out, "N schedule ({} points):", n.len());
    write_schedule(&mut out, &n, false);
    let relevant = match config.experiment.pipeline {
        Pipeline::ReconstructSigma | Pipeline::ReconstructGamma => &m,
        Pipeline::ReconstructDgamma => &n,
        _ => &m[..0],
    };
    let kept = relevant.iter().filter(|p| p.kept).count();
    let dropped = relevant.len() - kept;
    if dropped > 0 {
        let _ = writeln!(
            out,
            "warning: {dropped} schedule point(s) truncated by resolvability; {kept} remain"
        );
    }
    if !relevant.is_empty() && kept < 4 {
        let _ = writeln!(out, "warning: fewer than 4 points remain; extrapolation will fail");
    }
    let _ = writeln!(
        out,
        "probes: normalization = {:?}, pair cutoff = {:?}, fd_step = {}, correction = {:?}",
        config.probes.normalization,
        config.probes.pair_cutoff,
        config.probes.fd_step,
        config.probes.correction
    );
    let _ = writeln!(out, "output: {}", config.experiment.output_dir.display());
    Ok(out)
}
