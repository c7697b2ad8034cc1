//! The nonlinear functionals built on conductivity solutions:
//!
//! * `I(u, w) = int γ|grad u|^(p-2) grad u . conj(grad w)`;
//! * `J1`, `J2`: Wirtinger derivatives of the bilinear form
//!   `I(u, conj w)` in the directions `conj(u2)` and `u2`;
//! * `K = (p-2)/2 (J2 - J1) = int β grad u2 . grad u3` with
//!   `β = γ|grad u1|^(p-2)`.
//!
//! Every functional is available in oracle mode (direct corner quadrature
//! with a known γ) and in inverse mode (through DN measurements only).

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dn_map::{i_points, DnOracle, EpsSchedule};
use crate::error::{Error, Result};
use crate::forward::ConductivitySolver;
use crate::grid::{gradient, nodal_to_corners, CornerGradients, DirichletData, Grid, ScalarField};
use crate::limit::{extrapolate, LimitSeries};

/// Admissible range of the relative finite-difference step.
pub const FD_BRACKET: (f64, f64) = (1e-5, 1e-2);
pub const DEFAULT_FD_STEP: f64 = 1e-3;

/// Three conductivity solutions; `u1` is real with a non-vanishing gradient.
#[derive(Clone, Debug)]
pub struct SolutionTriple {
    pub u1: ScalarField,
    pub u2: ScalarField,
    pub u3: ScalarField,
}

impl SolutionTriple {
    pub fn new(u1: ScalarField, u2: ScalarField, u3: ScalarField) -> Result<Self> {
        if u1.grid() != u2.grid() || u1.grid() != u3.grid() {
            return Err(Error::InvalidInput("triple fields live on different grids".into()));
        }
        if !u1.is_real(1e-12) {
            return Err(Error::InvalidInput("u1 must be real valued".into()));
        }
        let min = CornerGradients::of(&u1)
            .norm_sqr()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        if !(min > 0.0) {
            return Err(Error::SingularWeight(
                "grad u1 vanishes somewhere in the domain".into(),
            ));
        }
        Ok(Self { u1, u2, u3 })
    }

    pub fn grid(&self) -> &Grid {
        self.u1.grid()
    }

    /// Smallest corner value of `|grad u1|`.
    pub fn min_gradient(&self) -> f64 {
        CornerGradients::of(&self.u1)
            .norm_sqr()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

/// How `I` is evaluated.
#[derive(Clone, Debug)]
pub enum IEvaluator<'a> {
    /// Direct quadrature with per-corner γ samples.
    Oracle { gamma: Vec<f64>, p: f64, grid: Grid },
    /// DN measurements only; `known` is the experimenter's conductivity solver.
    Inverse {
        oracle: &'a DnOracle,
        known: &'a ConductivitySolver,
        eps: EpsSchedule,
    },
}

impl<'a> IEvaluator<'a> {
    pub fn oracle(gamma: &ScalarField, p: f64) -> Self {
        let g = *gamma.grid();
        let vals: Vec<f64> = gamma.values().iter().map(|v| v.re).collect();
        IEvaluator::Oracle {
            gamma: nodal_to_corners(&vals, &g),
            p,
            grid: g,
        }
    }

    pub fn inverse(oracle: &'a DnOracle, known: &'a ConductivitySolver, eps: EpsSchedule) -> Self {
        IEvaluator::Inverse { oracle, known, eps }
    }

    pub fn p(&self) -> f64 {
        match self {
            IEvaluator::Oracle { p, .. } => *p,
            IEvaluator::Inverse { oracle, .. } => oracle.exponent(),
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self, IEvaluator::Oracle { .. })
    }

    pub fn mode_name(&self) -> &'static str {
        if self.is_oracle() {
            "oracle"
        } else {
            "inverse"
        }
    }
}

fn dot(a: [C64; 2], b: [C64; 2]) -> C64 {
    a[0] * b[0] + a[1] * b[1]
}

fn dot_conj(a: [C64; 2], b: [C64; 2]) -> C64 {
    a[0] * b[0].conj() + a[1] * b[1].conj()
}

/// Oracle-mode `I(u0, w)` by corner quadrature.
fn quadrature_i(gamma: &[f64], p: f64, u0: &ScalarField, w: &ScalarField) -> Result<C64> {
    let gu = CornerGradients::of(u0);
    let gw = CornerGradients::of(w);
    let mut s = C64::new(0.0, 0.0);
    for ((a, b), gm) in gu.values().iter().zip(gw.values()).zip(gamma) {
        let n2 = a[0].norm_sqr() + a[1].norm_sqr();
        if n2 == 0.0 {
            if p < 2.0 {
                return Err(Error::SingularWeight(
                    "grad u0 vanishes at a quadrature point and p < 2".into(),
                ));
            }
            continue;
        }
        s += dot_conj(*a, *b) * (gm * n2.powf(0.5 * (p - 2.0)));
    }
    Ok(s * u0.grid().corner_weight())
}

/// `I(u0, w) = int γ|grad u0|^(p-2) grad u0 . conj(grad w)`.
///
/// Inverse mode returns the extrapolated measurement limit for the data
/// `u0|_boundary`.
pub fn eval_i(e: &IEvaluator, u0: &ScalarField, w: &ScalarField) -> Result<C64> {
    match e {
        IEvaluator::Oracle { gamma, p, .. } => quadrature_i(gamma, *p, u0, w),
        IEvaluator::Inverse { oracle, known, eps } => {
            let pts = i_points(oracle, known, &DirichletData::from_field(u0), w, eps)?;
            Ok(extrapolate(&pts, Some((oracle.exponent() - 2.0).abs()))?.limit())
        }
    }
}

/// Direct-quadrature values of the functionals for a triple (oracle mode).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DirectValues {
    pub j1: C64,
    pub j2: C64,
    /// `int β grad u2 . grad u3`.
    pub k_beta: C64,
}

pub fn direct_values(gamma: &[f64], p: f64, t: &SolutionTriple) -> DirectValues {
    let g1 = CornerGradients::of(&t.u1);
    let g2 = CornerGradients::of(&t.u2);
    let g3 = CornerGradients::of(&t.u3);
    let c = 2.0 / (p - 2.0);
    let (mut j1, mut j2, mut k) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for (((a, b), d), gm) in g1
        .values()
        .iter()
        .zip(g2.values())
        .zip(g3.values())
        .zip(gamma)
    {
        let n2 = a[0].norm_sqr() + a[1].norm_sqr();
        let w4 = gm * n2.powf(0.5 * (p - 4.0));
        let ab = dot(*a, *b);
        let ad = dot(*a, *d);
        let bd = dot(*b, *d);
        let abar_b = dot([a[0].conj(), a[1].conj()], *b);
        j1 += ab * ad * w4;
        j2 += (abar_b * ad + bd * (c * n2)) * w4;
        k += bd * (gm * n2.powf(0.5 * (p - 2.0)));
    }
    let w = t.grid().corner_weight();
    DirectValues {
        j1: j1 * w,
        j2: j2 * w,
        k_beta: k * w,
    }
}

/// Which Wirtinger derivative a `J` functional takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Derivative {
    /// `∂_{conj z}` in the direction `conj(u2)`.
    J1,
    /// `∂_z` in the direction `u2`.
    J2,
}

/// Stencil nodes `±t, ±it` and the weights realizing the Wirtinger
/// derivative from the four samples.
fn stencil(kind: Derivative, t: f64) -> [(C64, C64); 4] {
    let i = C64::new(0.0, 1.0);
    let h = 1.0 / (4.0 * t);
    // ∂_{conj z} = (∂_x + i ∂_y)/2, ∂_z = (∂_x - i ∂_y)/2
    let sy = match kind {
        Derivative::J1 => i,
        Derivative::J2 => -i,
    };
    [
        (C64::new(t, 0.0), C64::new(h, 0.0)),
        (C64::new(-t, 0.0), C64::new(-h, 0.0)),
        (C64::new(0.0, t), sy * h),
        (C64::new(0.0, -t), -sy * h),
    ]
}

fn rms_gradient(u: &ScalarField) -> f64 {
    CornerGradients::of(u).rms()
}

/// Absolute step `fd_step * rms|grad u1| / rms|grad u2|`.
pub fn absolute_step(t: &SolutionTriple, fd_step: f64) -> Result<f64> {
    if !(fd_step >= FD_BRACKET.0 && fd_step <= FD_BRACKET.1) {
        return Err(Error::UnstableStep(fd_step));
    }
    let r2 = rms_gradient(&t.u2);
    if !(r2 > 0.0) {
        return Err(Error::InvalidInput("u2 has no gradient".into()));
    }
    Ok(fd_step * rms_gradient(&t.u1) / r2)
}

fn direction(kind: Derivative, t: &SolutionTriple) -> ScalarField {
    match kind {
        Derivative::J1 => t.u2.conj(),
        Derivative::J2 => t.u2.clone(),
    }
}

/// Finite-difference value of a `J` functional together with, in inverse
/// mode, the per-ε series it was extrapolated from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JValue {
    /// Oracle mode: direct quadrature; inverse mode: finite difference.
    pub value: C64,
    pub finite_difference: C64,
    pub direct: Option<C64>,
    pub series: Option<LimitSeries>,
}

impl JValue {
    /// `|fd - direct| / |direct|` when both are available.
    pub fn relative_gap(&self) -> Option<f64> {
        self.direct
            .map(|d| (self.finite_difference - d).norm() / d.norm().max(f64::MIN_POSITIVE))
    }
}

/// Raw per-ε samples of `2/(p-2) ∂ I(u1 + z v, conj u3)` for inverse mode.
fn inverse_j_points(
    oracle: &DnOracle,
    known: &ConductivitySolver,
    eps: &EpsSchedule,
    t: &SolutionTriple,
    kind: Derivative,
    step: f64,
) -> Result<Vec<(f64, C64)>> {
    let p = oracle.exponent();
    let v = direction(kind, t);
    let w = t.u3.conj();
    let mut acc: Option<Vec<(f64, C64)>> = None;
    for (z, weight) in stencil(kind, step) {
        let data = DirichletData::from_field(&t.u1.axpy(z, &v));
        let pts = i_points(oracle, known, &data, &w, eps)?;
        acc = Some(match acc {
            None => pts.iter().map(|(e, x)| (*e, x * weight)).collect(),
            Some(mut a) => {
                for (s, (_, x)) in a.iter_mut().zip(&pts) {
                    s.1 += x * weight;
                }
                a
            }
        });
    }
    let c = 2.0 / (p - 2.0);
    Ok(acc
        .unwrap()
        .into_iter()
        .map(|(e, x)| (e, x * c))
        .collect())
}

fn oracle_j_fd(
    gamma: &[f64],
    p: f64,
    t: &SolutionTriple,
    kind: Derivative,
    step: f64,
) -> Result<C64> {
    let v = direction(kind, t);
    let w = t.u3.conj();
    let mut s = C64::new(0.0, 0.0);
    for (z, weight) in stencil(kind, step) {
        s += quadrature_i(gamma, p, &t.u1.axpy(z, &v), &w)? * weight;
    }
    Ok(s * (2.0 / (p - 2.0)))
}

fn check_p(p: f64) -> Result<()> {
    if p == 2.0 || !(p > 1.0) {
        return Err(Error::InvalidInput(format!(
            "the J and K functionals need p > 1, p != 2 (got {p})"
        )));
    }
    Ok(())
}

fn eval_j(e: &IEvaluator, t: &SolutionTriple, fd_step: f64, kind: Derivative) -> Result<JValue> {
    check_p(e.p())?;
    let step = absolute_step(t, fd_step)?;
    match e {
        IEvaluator::Oracle { gamma, p, .. } => {
            let fd = oracle_j_fd(gamma, *p, t, kind, step)?;
            let d = direct_values(gamma, *p, t);
            let direct = match kind {
                Derivative::J1 => d.j1,
                Derivative::J2 => d.j2,
            };
            Ok(JValue {
                value: direct,
                finite_difference: fd,
                direct: Some(direct),
                series: None,
            })
        }
        IEvaluator::Inverse { oracle, known, eps } => {
            let pts = inverse_j_points(oracle, known, eps, t, kind, step)?;
            let series = extrapolate(&pts, Some((oracle.exponent() - 2.0).abs()))?;
            Ok(JValue {
                value: series.limit(),
                finite_difference: series.limit(),
                direct: None,
                series: Some(series),
            })
        }
    }
}

/// `J1 = 2/(p-2) ∂_{conj z} I(u1 + z conj(u2), conj(u3))` at `z = 0`.
pub fn eval_j1(e: &IEvaluator, t: &SolutionTriple, fd_step: f64) -> Result<JValue> {
    eval_j(e, t, fd_step, Derivative::J1)
}

/// `J2 = 2/(p-2) ∂_z I(u1 + z u2, conj(u3))` at `z = 0`.
pub fn eval_j2(e: &IEvaluator, t: &SolutionTriple, fd_step: f64) -> Result<JValue> {
    eval_j(e, t, fd_step, Derivative::J2)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KValue {
    /// `(p-2)/2 (J2 - J1)`.
    pub value: C64,
    /// Oracle mode: `int β grad u2 . grad u3` by direct quadrature.
    pub beta_form: Option<C64>,
    /// Oracle mode: `(p-2)/2 (J2 - J1)` from finite differences.
    pub finite_difference: Option<C64>,
    /// Inverse mode: per-ε series of `(p-2)/2 (J2 - J1)`.
    pub series: Option<LimitSeries>,
}

/// `K(u1, u2, u3) = (p-2)/2 (J2 - J1)`.
pub fn eval_k(e: &IEvaluator, t: &SolutionTriple, fd_step: f64) -> Result<KValue> {
    let p = e.p();
    check_p(p)?;
    let c = 0.5 * (p - 2.0);
    match e {
        IEvaluator::Oracle { gamma, .. } => {
            let d = direct_values(gamma, p, t);
            let step = absolute_step(t, fd_step)?;
            let fd = (oracle_j_fd(gamma, p, t, Derivative::J2, step)?
                - oracle_j_fd(gamma, p, t, Derivative::J1, step)?)
                * c;
            Ok(KValue {
                value: (d.j2 - d.j1) * c,
                beta_form: Some(d.k_beta),
                finite_difference: Some(fd),
                series: None,
            })
        }
        IEvaluator::Inverse { oracle, known, eps } => {
            let step = absolute_step(t, fd_step)?;
            let a = inverse_j_points(oracle, known, eps, t, Derivative::J1, step)?;
            let b = inverse_j_points(oracle, known, eps, t, Derivative::J2, step)?;
            let pts: Vec<(f64, C64)> = a
                .iter()
                .zip(&b)
                .map(|((e1, x1), (_, x2))| (*e1, (x2 - x1) * c))
                .collect();
            let series = extrapolate(&pts, Some((p - 2.0).abs()))?;
            Ok(KValue {
                value: series.limit(),
                beta_form: None,
                finite_difference: None,
                series: Some(series),
            })
        }
    }
}

/// `β = γ|grad u1|^(p-2)` at the nodes, with the nodal gradient.
pub fn eval_beta(gamma: &ScalarField, p: f64, u1: &ScalarField) -> Result<ScalarField> {
    let grad = gradient(u1)?;
    let n2 = grad.norm_sqr();
    let vals = gamma
        .values()
        .iter()
        .zip(n2)
        .map(|(g, n2)| {
            if n2 == 0.0 && p < 2.0 {
                Err(Error::SingularWeight("grad u1 vanishes at a node and p < 2".into()))
            } else if n2 == 0.0 {
                Ok(C64::new(0.0, 0.0))
            } else {
                Ok(g * n2.powf(0.5 * (p - 2.0)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(*gamma.grid(), vals)
}

/// FD values of `J1` and `J2` over a ladder of relative steps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityScan {
    pub steps: Vec<f64>,
    pub j1: Vec<C64>,
    pub j2: Vec<C64>,
    /// Largest relative change between neighbouring steps.
    pub max_relative_change: f64,
}

/// Oracle-mode scan of the finite-difference step over the admissible bracket.
pub fn fd_stability_scan(e: &IEvaluator, t: &SolutionTriple) -> Result<StabilityScan> {
    let IEvaluator::Oracle { gamma, p, .. } = e else {
        return Err(Error::InvalidInput(
            "the stability scan runs in oracle mode".into(),
        ));
    };
    check_p(*p)?;
    let steps = vec![1e-5, 1e-4, 1e-3, 1e-2];
    let mut j1 = Vec::new();
    let mut j2 = Vec::new();
    for &s in &steps {
        let h = absolute_step(t, s)?;
        j1.push(oracle_j_fd(gamma, *p, t, Derivative::J1, h)?);
        j2.push(oracle_j_fd(gamma, *p, t, Derivative::J2, h)?);
    }
    let rel = |v: &[C64]| {
        v.windows(2)
            .map(|w| (w[1] - w[0]).norm() / w[1].norm().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    };
    let max_relative_change = rel(&j1).max(rel(&j2));
    Ok(StabilityScan {
        steps,
        j1,
        j2,
        max_relative_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    fn grid() -> Grid {
        Grid::unit_model(17, 9).unwrap()
    }

    fn unit_oracle(g: &Grid, gamma: f64, p: f64) -> IEvaluator<'static> {
        IEvaluator::oracle(&ScalarField::constant(*g, c(gamma)), p)
    }

    fn affine(g: &Grid, a: f64, b: f64) -> ScalarField {
        g.sample_real(|x, y| a * x + b * y)
    }

    #[test]
    fn i_examples() {
        let g = grid();
        let e = unit_oracle(&g, 1.0, 3.0);
        let x1 = affine(&g, 1.0, 0.0);
        let x2 = affine(&g, 0.0, 1.0);
        assert!((eval_i(&e, &x1, &x1).unwrap() - c(2.0)).norm() < 1e-13);
        assert!(eval_i(&e, &x1, &x2).unwrap().norm() < 1e-13);
        let e = IEvaluator::oracle(&g.sample_real(|_, y| 1.0 + y), 3.0);
        // corner quadrature of an affine weight is exact up to the
        // right-angle-node sampling, which averages to the cell mean
        assert!((eval_i(&e, &x1, &x1).unwrap() - c(3.0)).norm() < 1e-12);
    }

    #[test]
    fn i_singular_for_sublinear_exponent() {
        let g = grid();
        let e = unit_oracle(&g, 1.0, 1.5);
        let flat = ScalarField::zeros(g);
        assert!(matches!(
            eval_i(&e, &flat, &affine(&g, 1.0, 0.0)),
            Err(Error::SingularWeight(_))
        ));
    }

    #[test]
    fn j_examples() {
        let g = grid();
        let e = unit_oracle(&g, 1.0, 3.0);
        let x1 = affine(&g, 1.0, 0.0);
        let x2 = affine(&g, 0.0, 1.0);
        let t = SolutionTriple::new(x1.clone(), x2.clone(), x1.clone()).unwrap();
        assert!(eval_j1(&e, &t, 1e-3).unwrap().value.norm() < 1e-13);
        let t = SolutionTriple::new(x1.clone(), x1.clone(), x1.clone()).unwrap();
        assert!((eval_j1(&e, &t, 1e-3).unwrap().value - c(2.0)).norm() < 1e-12);
        assert!((eval_j2(&e, &t, 1e-3).unwrap().value - c(6.0)).norm() < 1e-12);
        let k = eval_k(&e, &t, 1e-3).unwrap();
        assert!((k.value - c(2.0)).norm() < 1e-12);
        assert!((k.beta_form.unwrap() - c(2.0)).norm() < 1e-12);
        let t = SolutionTriple::new(x1.clone(), x2.clone(), x1.clone()).unwrap();
        // u2 = x2, u3 = x1: both terms of J2 vanish
        assert!(eval_j2(&e, &t, 1e-3).unwrap().value.norm() < 1e-13);
    }

    #[test]
    fn k_is_linear_in_gamma() {
        let g = grid();
        let u1 = g.sample_real(|x, y| x + 0.3 * y + 0.2 * x * y);
        let u2 = g.sample(|x, y| C64::new(x * y, x - y));
        let t = SolutionTriple::new(u1, u2.clone(), u2.conj()).unwrap();
        let k1 = eval_k(&unit_oracle(&g, 1.0, 3.0), &t, 1e-3).unwrap().value;
        let k2 = eval_k(&unit_oracle(&g, 2.0, 3.0), &t, 1e-3).unwrap().value;
        assert!((k2 - k1 * 2.0).norm() < 1e-12 * k1.norm());
    }

    #[test]
    fn beta_examples() {
        let g = grid();
        let b = eval_beta(&ScalarField::constant(g, c(2.0)), 3.0, &affine(&g, 1.0, 0.0)).unwrap();
        assert!(b.values().iter().all(|v| (v - c(2.0)).norm() < 1e-12));
        let b = eval_beta(&ScalarField::constant(g, c(1.0)), 3.0, &affine(&g, 2.0, 0.0)).unwrap();
        assert!(b.values().iter().all(|v| (v - c(2.0)).norm() < 1e-12));
        let gamma = g.sample_real(|_, y| 1.0 + y);
        let b = eval_beta(&gamma, 4.0, &affine(&g, 1.0, 0.0)).unwrap();
        assert!(b.max_abs_diff(&gamma) < 1e-12);
    }

    #[test]
    fn step_outside_bracket_rejected() {
        let g = grid();
        let x1 = affine(&g, 1.0, 0.0);
        let t = SolutionTriple::new(x1.clone(), x1.clone(), x1).unwrap();
        assert!(matches!(
            eval_j1(&unit_oracle(&g, 1.0, 3.0), &t, 0.1),
            Err(Error::UnstableStep(_))
        ));
    }

    #[test]
    fn triple_requires_real_nondegenerate_u1() {
        let g = grid();
        let x1 = affine(&g, 1.0, 0.0);
        assert!(SolutionTriple::new(ScalarField::zeros(g), x1.clone(), x1.clone()).is_err());
        assert!(SolutionTriple::new(x1.scale(C64::new(0.0, 1.0)), x1.clone(), x1).is_err());
    }

    fn random_triple(g: &Grid, a: [f64; 6]) -> SolutionTriple {
        let u1 = g.sample_real(|x, y| x + a[0] * y + 0.1 * a[1] * (x * x - y * y));
        let u2 = g.sample(|x, y| C64::new(a[2] * x + y, a[3] * y - x));
        let u3 = g.sample(|x, y| C64::new(a[4] * x * y, x + a[5] * y));
        SolutionTriple::new(u1, u2, u3).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn fd_matches_direct(a in proptest::array::uniform6(-0.5f64..0.5), p in prop_oneof![Just(1.5), Just(3.0), Just(4.0)]) {
            let g = grid();
            let e = IEvaluator::oracle(&g.sample_real(|x, y| 1.0 + 0.5 * x + y), p);
            let t = random_triple(&g, a);
            for j in [eval_j1(&e, &t, 1e-3).unwrap(), eval_j2(&e, &t, 1e-3).unwrap()] {
                prop_assert!(j.relative_gap().unwrap() < 1e-4, "{:?}", j);
            }
        }

        #[test]
        fn k_positive_and_hermitian(a in proptest::array::uniform6(-0.5f64..0.5)) {
            let g = grid();
            let e = IEvaluator::oracle(&g.sample_real(|x, y| 1.0 + 0.5 * x + y), 3.0);
            let t = random_triple(&g, a);
            let kk = eval_k(&e, &SolutionTriple::new(t.u1.clone(), t.u2.clone(), t.u2.conj()).unwrap(), 1e-3).unwrap();
            prop_assert!(kk.value.re > 0.0);
            prop_assert!(kk.value.im.abs() <= 1e-10 * kk.value.norm());
            let k23 = eval_k(&e, &SolutionTriple::new(t.u1.clone(), t.u2.clone(), t.u3.conj()).unwrap(), 1e-3).unwrap().value;
            let k32 = eval_k(&e, &SolutionTriple::new(t.u1.clone(), t.u3.clone(), t.u2.conj()).unwrap(), 1e-3).unwrap().value;
            prop_assert!((k23 - k32.conj()).norm() < 1e-12 * k23.norm().max(1.0));
            prop_assert!((kk.value - kk.beta_form.unwrap()).norm() < 1e-10 * kk.value.norm());
        }

        #[test]
        fn halving_step_is_stable(a in proptest::array::uniform6(-0.5f64..0.5)) {
            let g = grid();
            let e = IEvaluator::oracle(&g.sample_real(|x, y| 1.0 + 0.5 * x + y), 3.0);
            let t = random_triple(&g, a);
            for (x, y) in [(eval_j1(&e, &t, 1e-3).unwrap(), eval_j1(&e, &t, 5e-4).unwrap()),
                           (eval_j2(&e, &t, 1e-3).unwrap(), eval_j2(&e, &t, 5e-4).unwrap())] {
                let rel = (x.finite_difference - y.finite_difference).norm() / x.finite_difference.norm();
                prop_assert!(rel < 1e-4);
            }
        }
    }

    #[test]
    fn stability_scan_over_bracket() {
        let g = grid();
        let e = IEvaluator::oracle(&g.sample_real(|x, y| 1.0 + 0.5 * x + y), 3.0);
        let t = random_triple(&g, [0.1, 0.2, -0.3, 0.4, 0.1, -0.2]);
        let scan = fd_stability_scan(&e, &t).unwrap();
        assert_eq!(scan.steps.len(), 4);
        assert!(scan.max_relative_change < 1e-3, "{}", scan.max_relative_change);
    }
}
