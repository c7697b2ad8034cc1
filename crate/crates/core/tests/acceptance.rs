//! Acceptance criteria 1-10. Each criterion prints one PASS/FAIL line; the
//! binary exits non-zero when any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64 as C64;
use plap_recon::coefficients::{sample, ProblemCoefficients};
use plap_recon::config::{ExperimentConfig, PairCutoff};
use plap_recon::dn_map::sample_monotonicity_ratio;
use plap_recon::experiment::{run, Summary};
use plap_recon::forward::{solve_perturbed_plaplace, ConductivitySolver, SolverOptions};
use plap_recon::grid::{h1_norm, DirichletData, Grid, ScalarField};
use plap_recon::limit::{extrapolate, loglog_slope};
use plap_recon::probes::ProbeFrame;
use plap_recon::reconstruct::ReconstructionReport;
use plap_recon::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).expect("shipped config loads")
}

fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ")
}

fn data(g: &Grid, f: impl Fn(f64, f64) -> f64) -> DirichletData {
    DirichletData::from_fn(*g, |x, y| c(f(x, y)))
}

fn report<'a>(s: &'a Summary, quantity: &str) -> &'a ReconstructionReport {
    s.reports
        .iter()
        .find(|r| r.quantity == quantity)
        .expect("pipeline reports the quantity")
}

fn value(s: &Summary, quantity: &str) -> f64 {
    report(s, quantity).value
}

fn forward_exactness() -> Result<Outcome> {
    let start = Instant::now();
    let g = Grid::unit_model(65, 33)?;
    let coef = ProblemCoefficients::new("1", "1", 3.0, 0.4, 0.4)?;
    let affine = |x: f64, y: f64| 0.3 + x - 0.5 * y;
    let (u, rep) = solve_perturbed_plaplace(&g, &coef, &data(&g, affine), &SolverOptions::default())?;
    let err = u.max_abs_diff(&g.sample_real(affine));
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        rep.converged && err < 1e-8 && secs < 10.0,
        format!("max nodal error {err:.2e}, {secs:.2} s"),
    ))
}

/// Nodal values of `g(y)` solving `g' + γ(y) |g'| g' = c0`, `g(0) = 0`,
/// `g(1) = 1` for `p = 3`; `g'` has a closed form and `c0` is bisected.
fn flux_profile(gamma: impl Fn(f64) -> f64, ys: &[f64]) -> Vec<f64> {
    let slope = |c0: f64, y: f64| {
        let a = gamma(y);
        (-1.0 + (1.0 + 4.0 * a * c0).sqrt()) / (2.0 * a)
    };
    let integral = |c0: f64, b: f64| {
        let n = 4000;
        let h = b / n as f64;
        let mut s = slope(c0, 0.0) + slope(c0, b);
        for k in 1..n {
            s += slope(c0, k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if integral(mid, 1.0) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c0 = 0.5 * (lo + hi);
    ys.iter().map(|&y| integral(c0, y)).collect()
}

fn manufactured_order() -> Result<Outcome> {
    // constant γ makes the profile affine and discretely exact, so the
    // profile is driven by γ = 1 + x2
    let mut errs = Vec::new();
    for n in [33, 65, 129] {
        let g = Grid::unit_model(n, n)?;
        let ys: Vec<f64> = (0..g.ny()).map(|j| g.y(j)).collect();
        let prof = flux_profile(|y| 1.0 + y, &ys);
        let exact = ScalarField::from_real(g, &(0..g.node_count()).map(|k| prof[g.ij(k).1]).collect::<Vec<_>>())?;
        let coef = ProblemCoefficients::new("1", "1 + x2", 3.0, 0.4, 0.4)?;
        let opts = SolverOptions::default().with_tolerance(1e-13);
        let (u, _) = solve_perturbed_plaplace(&g, &coef, &DirichletData::from_field(&exact), &opts)?;
        errs.push(u.max_abs_diff(&exact));
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(outcome(
        orders.iter().all(|&q| q >= 1.8),
        format!("errors {}, orders {orders:.3?}", sci(&errs)),
    ))
}

fn eps_slope(p: f64) -> Result<f64> {
    let g = Grid::unit_model(65, 33)?;
    let coef = ProblemCoefficients::new("1 + 0.25*x1", "1 + 0.5*x1 + x2", p, 0.4, 0.4)?;
    let f = data(&g, |x, y| x + 0.5 * x * y + 0.3 * y * y);
    let u0 = ConductivitySolver::new(&sample(&coef.sigma, &g))?.solve(&f)?;
    let opts = SolverOptions::default().with_tolerance(1e-12);
    let (mut eps, mut norms) = (Vec::new(), Vec::new());
    for k in 0..6 {
        let e = 0.1 * 0.5f64.powi(k);
        let diff = if p > 2.0 {
            let (u, _) = solve_perturbed_plaplace(&g, &coef, &f.scale(c(e)), &opts)?;
            u.sub(&u0.scale(c(e)))
        } else {
            let (u, _) = solve_perturbed_plaplace(&g, &coef, &f.scale(c(1.0 / e)), &opts)?;
            u.scale(c(e)).sub(&u0)
        };
        eps.push(e);
        norms.push(h1_norm(&diff)?);
    }
    Ok(loglog_slope(&eps, &norms))
}

fn eps_expansion_order() -> Result<Outcome> {
    let s3 = eps_slope(3.0)?;
    let s15 = eps_slope(1.5)?;
    Ok(outcome(
        (s3 - 2.0).abs() <= 0.2 && (s15 - 0.5).abs() <= 0.2,
        format!("slope {s3:.3} at p = 3 (target 2), {s15:.3} at p = 1.5 (target 0.5)"),
    ))
}

fn dn_linearization() -> Result<Outcome> {
    let mut gaps = Vec::new();
    for p in [3.0, 1.5] {
        let mut cfg = config("dn_check.toml");
        cfg.coefficients.p = p;
        let s = run(&cfg)?.summary;
        gaps.push(s.dn_check.expect("dn-check summary").linear_relative_gap);
    }
    Ok(outcome(
        gaps.iter().all(|&g| g <= 0.01),
        format!("relative gap {:.2e} at p = 3, {:.2e} at p = 1.5", gaps[0], gaps[1]),
    ))
}

fn identity_suite() -> Result<Outcome> {
    let s = run(&config("identity_suite.toml"))?.summary;
    let ok = s.identities.iter().filter(|r| r.relative_gap <= r.budget).count();
    let worst = |f: &str| {
        s.identities
            .iter()
            .filter(|r| r.functional.starts_with(f))
            .map(|r| r.relative_gap)
            .fold(0.0, f64::max)
    };
    Ok(outcome(
        ok == s.identities.len() && ok == 15,
        format!(
            "{ok}/{} within budget; worst J gap {:.2e}, worst K gap {:.2e}",
            s.identities.len(),
            worst("J"),
            worst("K")
        ),
    ))
}

fn exponential_integral(f: impl Fn(f64) -> f64) -> f64 {
    // Simpson on [0, 60]; the tail is below e^-60
    let n = 200_000;
    let h = 60.0 / n as f64;
    let mut s = f(0.0) + f(60.0);
    for k in 1..n {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn probe_constants() -> Result<Outcome> {
    let a = exponential_integral(|y| 2.0 * (-y).exp() - (-2.0 * y).exp());
    let b = exponential_integral(|y| y * ((-y).exp() - 2.0 * (-2.0 * y).exp()));
    let quadrature_ok = (a - 1.5).abs() < 1e-8 && (b - 0.5).abs() < 1e-8;

    // with γ ≡ 1, p = 3 and u1 = x1 the weight h is identically 1
    let mut cfg = config("reconstruct_dgamma.toml");
    cfg.coefficients.gamma = "1".into();
    cfg.data.gamma_at_x0 = Some(1.0);
    let s = run(&cfg)?.summary;
    let r = report(&s, "dgamma");
    let raw = &r
        .auxiliary
        .iter()
        .find(|a| a.name == "d_n")
        .expect("raw D_N series")
        .points;
    let target = 1.5 * ProbeFrame::default().pair_gradient_energy();
    let values: Vec<String> = raw.iter().map(|(t, v)| format!("{:.0}:{:.4}", 1.0 / t, v.re)).collect();
    let (limit, detail) = match extrapolate(raw, Some(0.5)) {
        Ok(l) => (Some(l.limit().re), format!("{:.4}", l.limit().re)),
        Err(e) => (None, format!("none ({e})")),
    };
    let limit_ok = limit.is_some_and(|l| (l - target).abs() <= 0.05 * target);
    Ok(outcome(
        quadrature_ok && limit_ok,
        format!(
            "integrals {a:.10} and {b:.10}; D_N for h = 1 by N [{}], limit {detail} vs 1.5 int |eta'|^2 = {target:.4}",
            values.join(", ")
        ),
    ))
}

fn gamma_reconstruction() -> Result<Outcome> {
    let start = Instant::now();
    let oracle = run(&config("reconstruct_gamma.toml"))?.summary;
    let mut inv_cfg = config("reconstruct_gamma_inverse.toml");
    inv_cfg.experiment.score_inverse = true;
    let inverse = run(&inv_cfg)?.summary;
    let secs = start.elapsed().as_secs_f64();
    let (go, gi) = (value(&oracle, "gamma"), value(&inverse, "gamma"));
    let per_m: Vec<f64> = report(&oracle, "gamma").series.errors_to(c(1.0));
    let decreasing = per_m.windows(2).all(|w| w[1] < w[0]);
    Ok(outcome(
        (go - 1.0).abs() <= 0.05 && (gi - 1.0).abs() <= 0.10 && decreasing && secs < 300.0,
        format!("oracle {go:.5}, inverse {gi:.5}, per-M errors {per_m:.4?}, {secs:.1} s"),
    ))
}

fn dgamma_reconstruction() -> Result<Outcome> {
    let s = run(&config("reconstruct_dgamma.toml"))?.summary;
    let d = value(&s, "dgamma");
    let mut ctl = config("reconstruct_dgamma.toml");
    ctl.coefficients.gamma = "1".into();
    let d0 = value(&run(&ctl)?.summary, "dgamma");
    let floor = 0.05 * 1.5 * ctl.frame().pair_gradient_energy();
    Ok(outcome(
        (d - 1.0).abs() <= 0.10 && d0.abs() < floor,
        format!("1 + x2 gives {d:.5}; constant control gives {d0:.2e} (floor {floor:.3})"),
    ))
}

fn invariance_suite() -> Result<Outcome> {
    let base = config("reconstruct_gamma.toml");
    let g_base = value(&run(&base)?.summary, "gamma");
    let budget = 0.05;

    let mut other_u1 = base.clone();
    other_u1.data.u1 = "x1 + 0.2*x2".into();
    let g_u1 = value(&run(&other_u1)?.summary, "gamma");

    let mut other_eta = base.clone();
    other_eta.probes.plateau = 0.7;
    other_eta.probes.pair_cutoff = PairCutoff::Bump;
    let g_eta = value(&run(&other_eta)?.summary, "gamma");

    let mut doubled = base.clone();
    doubled.coefficients.gamma = "2 + x1 + 2*x2".into();
    let g_double = value(&run(&doubled)?.summary, "gamma");

    // γ(x0) is an input of the normal-derivative step; supplying it isolates
    // that step, since a γ(x0) error enters as a cutoff-dependent drift
    let mut dg = config("reconstruct_dgamma.toml");
    dg.data.gamma_at_x0 = Some(1.0);
    let d_base = value(&run(&dg)?.summary, "dgamma");
    let mut dg_eta = dg.clone();
    dg_eta.probes.plateau = 0.7;
    dg_eta.probes.pair_cutoff = PairCutoff::Bump;
    let d_eta = value(&run(&dg_eta)?.summary, "dgamma");
    let mut chained = dg_eta.clone();
    chained.data.gamma_at_x0 = None;
    let d_chained = match run(&chained) {
        Ok(o) => format!("{:.4}", value(&o.summary, "dgamma")),
        Err(e) => format!("none ({e})"),
    };

    let mut tangential = dg.clone();
    tangential.coefficients.gamma = "1 + x1".into();
    tangential.probes.pair_cutoff = PairCutoff::Bump;
    let d_tan = value(&run(&tangential)?.summary, "dgamma");
    let floor = 0.05 * 1.5 * tangential.frame().pair_gradient_energy();

    let checks = [
        (g_u1 - g_base).abs() <= 2.0 * budget,
        (g_eta - g_base).abs() <= 2.0 * budget,
        (g_double - 2.0 * g_base).abs() <= 2.0 * 2.0 * budget,
        (d_eta - d_base).abs() <= 2.0 * 0.10,
        d_tan.abs() <= floor,
    ];
    Ok(outcome(
        checks.iter().all(|&b| b),
        format!(
            "gamma {g_base:.4} / u1 {g_u1:.4} / eta {g_eta:.4} / doubled {g_double:.4}; \
             dgamma {d_base:.4} / eta {d_eta:.4} (eta with recovered gamma: {d_chained}); tangential {d_tan:.2e} (floor {floor:.3})"
        ),
    ))
}

fn monotonicity_bound() -> Result<Outcome> {
    let ratios: Vec<f64> = [2.5, 3.0, 4.0]
        .iter()
        .map(|&p| sample_monotonicity_ratio(p, 10_000, 7))
        .collect();
    Ok(outcome(
        ratios.iter().all(|&r| r <= 3.0),
        format!("max ratio {ratios:.4?} for p = 2.5, 3, 4"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Result<Outcome>); 10] = [
        (1, "forward exactness", forward_exactness),
        (2, "manufactured nonlinear solve", manufactured_order),
        (3, "eps-expansion order", eps_expansion_order),
        (4, "DN linearization", dn_linearization),
        (5, "identity suite", identity_suite),
        (6, "probe constants and D_N limit", probe_constants),
        (7, "gamma reconstruction", gamma_reconstruction),
        (8, "normal derivative reconstruction", dgamma_reconstruction),
        (9, "invariance suite", invariance_suite),
        (10, "monotonicity sampling bound", monotonicity_bound),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (k, name, check) in criteria {
        if only.is_some_and(|o| o != k) {
            continue;
        }
        let o = check().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {k}: {tag} {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
