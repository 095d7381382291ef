//! Run configuration: a JSON file with every field optional, overridden by flags.

use std::path::{Path, PathBuf};

use chaining_core::apps::cone::{ConeSpec, ConicMethod};
use chaining_core::apps::small_ball::MinSingleConstants;
use chaining_core::orlicz::{make_orlicz, CatalogKind, OrliczFunction};
use chaining_core::sim::TailConstants;
use chaining_core::subgaussian::{DriverKind, ProcessDriver};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Orlicz,
    Bounds,
    Scheme,
    AuditMoment,
    AuditTail,
    Chaos,
    Jl,
    Recover,
    SmallBall,
}

impl CommandName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandName::Orlicz => "orlicz",
            CommandName::Bounds => "bounds",
            CommandName::Scheme => "scheme",
            CommandName::AuditMoment => "audit-moment",
            CommandName::AuditTail => "audit-tail",
            CommandName::Chaos => "chaos",
            CommandName::Jl => "jl",
            CommandName::Recover => "recover",
            CommandName::SmallBall => "small-ball",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    pub kind: CatalogKind,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl Default for PhiSpec {
    fn default() -> Self {
        PhiSpec { kind: CatalogKind::HalfSquare, params: Vec::new() }
    }
}

impl PhiSpec {
    pub fn build(&self) -> CliResult<OrliczFunction> {
        Ok(make_orlicz(self.kind, &self.params)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMode {
    /// Exact oracle when the space is small enough, heuristic otherwise.
    #[default]
    Auto,
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrliczSection {
    pub x_max: f64,
    pub grid_points: usize,
    pub delta2_b: Vec<f64>,
}

impl Default for OrliczSection {
    fn default() -> Self {
        OrliczSection { x_max: 32.0, grid_points: 33, delta2_b: vec![2.0] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    pub mode: GammaMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub r: u32,
    pub c_star: f64,
    /// Generated separated families for a growth-condition audit (0 = none).
    pub families: usize,
    pub max_points: usize,
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection { r: 16, c_star: 0.125, families: 0, max_points: 8 }
    }
}

/// Generated canonical Gaussian models, used when no models file is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySection {
    pub count: usize,
    pub max_index: usize,
    pub dim: usize,
}

impl Default for FamilySection {
    fn default() -> Self {
        FamilySection { count: 10, max_index: 16, dim: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailTarget {
    #[default]
    Sup,
    Increment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailSection {
    pub target: TailTarget,
    pub driver: DriverKind,
    pub u_grid: Option<Vec<f64>>,
    /// Fitted from a moment audit of the same model when absent.
    pub constants: Option<TailConstants>,
    pub model_index: usize,
}

impl Default for TailSection {
    fn default() -> Self {
        TailSection {
            target: TailTarget::Sup,
            driver: DriverKind::Gaussian { sigma: 1.0 },
            u_grid: None,
            constants: None,
            model_index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosSection {
    pub count: usize,
    pub max_dim: usize,
    pub min_size: usize,
    pub max_size: usize,
}

impl Default for ChaosSection {
    fn default() -> Self {
        ChaosSection { count: 10, max_dim: 4, min_size: 5, max_size: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointSource {
    /// Two points along one direction.
    #[default]
    Demo,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JlSection {
    pub m: usize,
    pub eps: f64,
    pub driver: DriverKind,
    pub source: PointSource,
    pub n_points: usize,
    pub dim: usize,
    pub min_all_pairs_rate: f64,
    pub isotropy_draws: usize,
}

impl Default for JlSection {
    fn default() -> Self {
        JlSection {
            m: 1024,
            eps: 0.25,
            driver: DriverKind::Gaussian { sigma: 1.0 },
            source: PointSource::Demo,
            n_points: 32,
            dim: 64,
            min_all_pairs_rate: 0.9,
            isotropy_draws: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoverSection {
    pub n: usize,
    pub m: usize,
    pub sparsity: usize,
    pub eta: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// `None` picks the exact full-space oracle when available, else projected descent on the descent cone.
    pub cone_method: Option<ConicMethod>,
    pub budget: usize,
}

impl Default for RecoverSection {
    fn default() -> Self {
        RecoverSection {
            n: 32,
            m: 16,
            sparsity: 2,
            eta: 0.01,
            tol: 1e-9,
            max_iters: 50_000,
            cone_method: None,
            budget: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmallBallSection {
    pub driver: DriverKind,
    pub cone: ConeSpec,
    pub m: usize,
    pub xi: f64,
    pub t: f64,
    pub n_dirs: usize,
    pub minsingle: Option<MinSingleConstants>,
}

impl Default for SmallBallSection {
    fn default() -> Self {
        SmallBallSection {
            driver: DriverKind::Gaussian { sigma: 1.0 },
            cone: ConeSpec::FullSpace { dim: 8 },
            m: 64,
            xi: 0.3,
            t: 2.0,
            n_dirs: 32,
            minsingle: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<CommandName>,
    pub seed: u64,
    /// Monte Carlo trials; each command has its own default.
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub phi: PhiSpec,
    pub p: f64,
    pub p_grid: Vec<f64>,
    /// CSV point cloud, one vector per row.
    pub points: Option<PathBuf>,
    /// CSV distance matrix.
    pub distances: Option<PathBuf>,
    /// JSON list of equally shaped matrices.
    pub matrices: Option<PathBuf>,
    /// JSON recovery instance.
    pub instance: Option<PathBuf>,
    /// JSON list of process models.
    pub models: Option<PathBuf>,
    pub orlicz: OrliczSection,
    pub bounds: BoundsSection,
    pub scheme: SchemeSection,
    pub family: FamilySection,
    pub tail: TailSection,
    pub chaos: ChaosSection,
    pub jl: JlSection,
    pub recover: RecoverSection,
    pub small_ball: SmallBallSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            seed: 0,
            trials: None,
            out: None,
            format: Format::Json,
            phi: PhiSpec::default(),
            p: 1.0,
            p_grid: vec![1.0, 2.0, 4.0, 8.0],
            points: None,
            distances: None,
            matrices: None,
            instance: None,
            models: None,
            orlicz: OrliczSection::default(),
            bounds: BoundsSection::default(),
            scheme: SchemeSection::default(),
            family: FamilySection::default(),
            tail: TailSection::default(),
            chaos: ChaosSection::default(),
            jl: JlSection::default(),
            recover: RecoverSection::default(),
            small_ball: SmallBallSection::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> CliResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Config(format!("precondition failed: {name} must be at least {min}, got {v}")))
    }
}

fn moment_order(name: &str, p: f64) -> CliResult<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be a finite moment order ≥ 1, got {p}")))
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            column: e.column() as u64,
            message: e.to_string(),
        })
    }

    pub fn command(&self) -> CliResult<CommandName> {
        self.command.ok_or_else(|| CliError::Config("no command given".into()))
    }

    pub fn trials_or(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    /// Checks the numeric preconditions of the selected command.
    pub fn validate(&self) -> CliResult<()> {
        let command = self.command()?;
        self.phi.build()?;
        if let Some(t) = self.trials {
            at_least("trials", t, 1)?;
        }
        match command {
            CommandName::Orlicz => {
                positive("orlicz.x_max", self.orlicz.x_max)?;
                at_least("orlicz.grid_points", self.orlicz.grid_points, 2)?;
                for &b in &self.orlicz.delta2_b {
                    if !(b > 1.0) {
                        return Err(CliError::Config(format!("Δ2 factor b must exceed 1, got {b}")));
                    }
                }
            }
            CommandName::Bounds | CommandName::Scheme => {
                moment_order("p", self.p)?;
                if command == CommandName::Scheme {
                    if self.scheme.r < 8 {
                        return Err(CliError::Config(format!("scheme.r must be at least 8, got {}", self.scheme.r)));
                    }
                    positive("scheme.c_star", self.scheme.c_star)?;
                    if self.points.is_none() && self.distances.is_none() && self.scheme.families == 0 {
                        return Err(CliError::Config("scheme needs points, distances or scheme.families > 0".into()));
                    }
                } else if self.points.is_none() && self.distances.is_none() {
                    return Err(CliError::Config("bounds needs a points or distances file".into()));
                }
            }
            CommandName::AuditMoment => {
                at_least("trials", self.trials_or(100_000), 1)?;
                if self.p_grid.is_empty() {
                    return Err(CliError::Config("p_grid is empty".into()));
                }
                for &p in &self.p_grid {
                    moment_order("p_grid entry", p)?;
                }
                self.check_family()?;
            }
            CommandName::AuditTail => {
                moment_order("p", self.p)?;
                ProcessDriver::new(self.tail.driver.clone())?;
                if let Some(grid) = &self.tail.u_grid {
                    if grid.is_empty() || grid.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
                        return Err(CliError::Config("tail.u_grid must be nonempty, finite and nonnegative".into()));
                    }
                }
                self.check_family()?;
            }
            CommandName::Chaos => {
                moment_order("p", self.p)?;
                at_least("chaos.count", self.chaos.count, 1)?;
                at_least("chaos.max_dim", self.chaos.max_dim, 1)?;
                at_least("chaos.min_size", self.chaos.min_size, 1)?;
                if self.chaos.max_size < self.chaos.min_size {
                    return Err(CliError::Config("chaos.max_size must be at least chaos.min_size".into()));
                }
            }
            CommandName::Jl => {
                at_least("jl.m", self.jl.m, 1)?;
                positive("jl.eps", self.jl.eps)?;
                ProcessDriver::new(self.jl.driver.clone())?;
                if !(0.0..=1.0).contains(&self.jl.min_all_pairs_rate) {
                    return Err(CliError::Config("jl.min_all_pairs_rate must lie in [0, 1]".into()));
                }
                if self.points.is_none() && self.jl.source == PointSource::Gaussian {
                    at_least("jl.n_points", self.jl.n_points, 2)?;
                    at_least("jl.dim", self.jl.dim, 1)?;
                }
                at_least("jl.isotropy_draws", self.jl.isotropy_draws, 2)?;
            }
            CommandName::Recover => {
                let r = &self.recover;
                positive("recover.tol", r.tol)?;
                at_least("recover.max_iters", r.max_iters, 1)?;
                if self.instance.is_none() {
                    at_least("recover.n", r.n, 1)?;
                    at_least("recover.m", r.m, 1)?;
                    if r.sparsity > r.n {
                        return Err(CliError::Config("recover.sparsity exceeds recover.n".into()));
                    }
                    if !(r.eta >= 0.0 && r.eta.is_finite()) {
                        return Err(CliError::Config(format!("recover.eta must be finite and nonnegative, got {}", r.eta)));
                    }
                }
            }
            CommandName::SmallBall => {
                let s = &self.small_ball;
                ProcessDriver::new(s.driver.clone())?;
                s.cone.validate()?;
                at_least("small_ball.m", s.m, 1)?;
                at_least("small_ball.n_dirs", s.n_dirs, 1)?;
                at_least("trials", self.trials_or(10_000), 2)?;
                positive("small_ball.xi", s.xi)?;
                positive("small_ball.t", s.t)?;
                moment_order("p", self.p)?;
            }
        }
        Ok(())
    }

    fn check_family(&self) -> CliResult<()> {
        if self.models.is_none() {
            at_least("family.count", self.family.count, 1)?;
            at_least("family.max_index", self.family.max_index, 2)?;
            at_least("family.dim", self.family.dim, 1)?;
        }
        Ok(())
    }
}
