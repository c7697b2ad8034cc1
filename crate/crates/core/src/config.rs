//! Experiment configuration: a TOML file with one section per concern.
//! Expression values use the coefficient syntax verbatim.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::ProblemCoefficients;
use crate::dn_map::EpsSchedule;
use crate::error::{Error, Result};
use crate::expr::CoeffExpr;
use crate::forward::SolverOptions;
use crate::grid::Grid;
use crate::probes::{CutoffShape, MNSchedule, NSchedule, Normalization, ProbeFrame};
use crate::reconstruct::{DnCorrection, ReconstructionOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Forward,
    DnCheck,
    ReconstructSigma,
    ReconstructGamma,
    ReconstructDgamma,
    IdentitySuite,
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Forward => "forward",
            Pipeline::DnCheck => "dn-check",
            Pipeline::ReconstructSigma => "reconstruct-sigma",
            Pipeline::ReconstructGamma => "reconstruct-gamma",
            Pipeline::ReconstructDgamma => "reconstruct-dgamma",
            Pipeline::IdentitySuite => "identity-suite",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Oracle,
    Inverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairCutoff {
    Plateau,
    Bump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub pipeline: Pipeline,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Seed of the monotonicity sampler, the only random component.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Attach ground truth to inverse-mode reports for scoring.
    #[serde(default)]
    pub score_inverse: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    pub sigma: String,
    pub gamma: String,
    pub p: f64,
    #[serde(default = "default_bound")]
    pub lambda: f64,
    #[serde(default = "default_bound")]
    pub m1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Boundary data of `u1`, and of the forward and DN-check solves.
    #[serde(default = "default_u1")]
    pub u1: String,
    /// Test function of the DN check.
    #[serde(default = "default_u1")]
    pub test: String,
    /// Known `γ(x0)` for the normal-derivative pipeline; recovered first
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_at_x0: Option<f64>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            u1: default_u1(),
            test: default_u1(),
            gamma_at_x0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            theta: default_theta(),
            delta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub eps0: f64,
    pub eps_ratio: f64,
    pub eps_count: usize,
    pub m0: f64,
    pub m_ratio: f64,
    pub m_count: usize,
    pub n_exponent: f64,
    pub n0: f64,
    pub n_ratio: f64,
    pub n_count: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let e = EpsSchedule::default();
        let n = NSchedule::default();
        Self {
            eps0: e.eps0,
            eps_ratio: e.ratio,
            eps_count: e.count,
            m0: 3.0,
            m_ratio: 2f64.sqrt(),
            m_count: 5,
            n_exponent: 1.5,
            n0: n.n_values[0],
            n_ratio: 2f64.sqrt(),
            n_count: n.n_values.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "default_pair_cutoff")]
    pub pair_cutoff: PairCutoff,
    /// Radius below which the `u_M` cutoff equals 1, in `[0.5, 1)`.
    #[serde(default = "default_plateau")]
    pub plateau: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub correction: DnCorrection,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            normalization: Normalization::Calibrated,
            pair_cutoff: default_pair_cutoff(),
            plateau: default_plateau(),
            fd_step: default_fd_step(),
            correction: DnCorrection::Measured,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub domain: DomainSection,
    pub coefficients: CoefficientSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub schedules: ScheduleSection,
    #[serde(default)]
    pub probes: ProbeSection,
}

fn default_mode() -> RunMode {
    RunMode::Oracle
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_seed() -> u64 {
    7
}
fn default_x_min() -> f64 {
    -1.0
}
fn default_x_max() -> f64 {
    1.0
}
fn default_height() -> f64 {
    1.0
}
fn default_bound() -> f64 {
    0.4
}
fn default_u1() -> String {
    "x1".into()
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_max_iterations() -> usize {
    200
}
fn default_theta() -> f64 {
    1.0
}
fn default_pair_cutoff() -> PairCutoff {
    PairCutoff::Plateau
}
fn default_plateau() -> f64 {
    0.5
}
fn default_fd_step() -> f64 {
    crate::functionals::DEFAULT_FD_STEP
}

impl Default for ExperimentConfig {
    /// The γ reconstruction instance `γ = 1 + 0.5 x1 + x2`, `σ ≡ 1`, `p = 3`.
    fn default() -> Self {
        Self {
            experiment: ExperimentSection {
                pipeline: Pipeline::ReconstructGamma,
                mode: default_mode(),
                output_dir: default_output(),
                seed: default_seed(),
                score_inverse: false,
            },
            domain: DomainSection {
                x_min: -1.0,
                x_max: 1.0,
                height: 1.0,
                nx: 257,
                ny: 129,
            },
            coefficients: CoefficientSection {
                sigma: "1".into(),
                gamma: "1 + 0.5*x1 + x2".into(),
                p: 3.0,
                lambda: default_bound(),
                m1: default_bound(),
            },
            data: DataSection::default(),
            solver: SolverSection::default(),
            schedules: ScheduleSection::default(),
            probes: ProbeSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses every expression and checks every number, without solving.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.coefficients()?;
        self.u1_expr()?;
        CoeffExpr::parse(&self.data.test)?;
        self.solver_options().validate(self.coefficients.p)?;
        self.eps_schedule().validate()?;
        let s = &self.schedules;
        for (name, v) in [("m0", s.m0), ("n0", s.n0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        for (name, v) in [("m_ratio", s.m_ratio), ("n_ratio", s.n_ratio)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must exceed 1")));
            }
        }
        if s.m_count < 4 || s.n_count < 4 {
            return Err(Error::Config("M and N schedules need at least 4 points".into()));
        }
        if !(s.n_exponent > 1.0) {
            return Err(Error::Config(format!(
                "n_exponent = {} must exceed 1 so that M/N -> 0",
                s.n_exponent
            )));
        }
        let pr = &self.probes;
        if !(pr.plateau >= 0.5 && pr.plateau < 1.0) {
            return Err(Error::Config(format!("plateau = {} must lie in [0.5, 1)", pr.plateau)));
        }
        if !(pr.fd_step > 0.0) {
            return Err(Error::Config(format!("fd_step = {} must be positive", pr.fd_step)));
        }
        let p = self.coefficients.p;
        let needs_nonlinear = !matches!(self.experiment.pipeline, Pipeline::ReconstructSigma)
            || self.experiment.mode == RunMode::Inverse;
        if needs_nonlinear && p == 2.0 {
            return Err(Error::Config("p = 2 is excluded".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let d = &self.domain;
        Grid::new(d.x_min, d.x_max, d.height, d.nx, d.ny)
    }

    pub fn coefficients(&self) -> Result<ProblemCoefficients> {
        let c = &self.coefficients;
        ProblemCoefficients::new(&c.sigma, &c.gamma, c.p, c.lambda, c.m1)
    }

    pub fn u1_expr(&self) -> Result<CoeffExpr> {
        CoeffExpr::parse(&self.data.u1)
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            delta: s.delta,
            theta: s.theta,
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
        }
    }

    pub fn eps_schedule(&self) -> EpsSchedule {
        let s = &self.schedules;
        EpsSchedule {
            eps0: s.eps0,
            ratio: s.eps_ratio,
            count: s.eps_count,
        }
    }

    pub fn m_schedule(&self) -> MNSchedule {
        let s = &self.schedules;
        MNSchedule::geometric(s.m0, s.m_ratio, s.m_count, s.n_exponent)
    }

    pub fn n_schedule(&self) -> NSchedule {
        let s = &self.schedules;
        NSchedule::geometric(s.n0, s.n_ratio, s.n_count)
    }

    pub fn frame(&self) -> ProbeFrame {
        let shape = match self.probes.pair_cutoff {
            PairCutoff::Plateau => CutoffShape::Plateau { inner: 0.5 },
            PairCutoff::Bump => CutoffShape::Bump,
        };
        let mut f = ProbeFrame::model(shape);
        f.eta = crate::probes::Cutoff::plateau(self.probes.plateau);
        f
    }

    pub fn reconstruction_options(&self) -> ReconstructionOptions {
        ReconstructionOptions {
            normalization: self.probes.normalization,
            fd_step: self.probes.fd_step,
            correction: self.probes.correction,
        }
    }
}
