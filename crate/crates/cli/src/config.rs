//! Experiment configuration, read from TOML.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use helmdd_core::gevp::FilterStrategy;
use helmdd_core::medium::{builtin_medium, load_medium, BuiltinMedium, GaussianSource};
use helmdd_core::{Bounds, MediumField, Mesh, SetupConfig, C64};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub decomposition: DecompositionConfig,
    #[serde(default)]
    pub coarse: CoarseConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub ramp: Option<RampConfig>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub nx: usize,
    pub ny: usize,
    /// `[xmin, xmax, ymin, ymax]`.
    #[serde(default = "unit_bounds")]
    pub bounds: [f64; 4],
    /// Angular frequency; give exactly one of `omega` and `omega_pi`.
    pub omega: Option<f64>,
    /// Angular frequency as a multiple of pi.
    pub omega_pi: Option<f64>,
    /// `constant`, `layers` or `wedge`; ignored when `medium_file` is set.
    #[serde(default = "default_medium")]
    pub medium: String,
    #[serde(default = "default_bands")]
    pub bands: usize,
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    /// Velocity raster in the `MEDIUM 1` format.
    pub medium_file: Option<PathBuf>,
    pub source: Option<SourceConfig>,
    /// Real constant impedance datum on the whole boundary.
    #[serde(default)]
    pub boundary_datum: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub center: [f64; 2],
    pub width: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionConfig {
    #[serde(default = "one_usize")]
    pub jx: usize,
    #[serde(default = "one_usize")]
    pub jy: usize,
    #[serde(default = "one_usize")]
    pub overlap: usize,
    #[serde(default = "one_usize")]
    pub oversample: usize,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig { jx: 1, jy: 1, overlap: 1, oversample: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseConfig {
    /// `none`, `tau`, `count` or `percent`.
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default)]
    pub value: f64,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        CoarseConfig { strategy: default_strategy(), value: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Gmres,
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialGuess {
    Zero,
    Random,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
    #[serde(default = "default_restart")]
    pub restart: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_initial")]
    pub initial: InitialGuess,
    #[serde(default = "yes")]
    pub parallel: bool,
    /// Fill the `time_s` column of the convergence CSV.
    #[serde(default)]
    pub record_time: bool,
    /// Solve directly as well, to report energy-norm errors.
    #[serde(default = "yes")]
    pub oracle: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: default_mode(),
            tol: default_tol(),
            maxit: default_maxit(),
            restart: default_restart(),
            seed: 0,
            initial: default_initial(),
            parallel: true,
            record_time: false,
            oracle: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_analysis_iterations")]
    pub iterations: usize,
    #[serde(default = "default_tail_samples")]
    pub tail_samples: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { enabled: false, iterations: default_analysis_iterations(), tail_samples: default_tail_samples() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output")]
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: default_output() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampConfig {
    pub points: Vec<RampPoint>,
    /// Percent coarse sizes tried at every point, besides the one-level run.
    #[serde(default = "default_percents")]
    pub coarse_percents: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampPoint {
    pub omega: Option<f64>,
    pub omega_pi: Option<f64>,
    pub nx: usize,
    pub ny: usize,
    pub jx: usize,
    pub jy: usize,
}

fn unit_bounds() -> [f64; 4] {
    [0.0, 1.0, 0.0, 1.0]
}
fn default_medium() -> String {
    "constant".into()
}
fn default_bands() -> usize {
    3
}
fn default_contrast() -> f64 {
    2.0
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_strategy() -> String {
    "none".into()
}
fn default_mode() -> Mode {
    Mode::Gmres
}
fn default_tol() -> f64 {
    1e-8
}
fn default_maxit() -> usize {
    1000
}
fn default_restart() -> usize {
    200
}
fn default_initial() -> InitialGuess {
    InitialGuess::Zero
}
fn default_analysis_iterations() -> usize {
    10
}
fn default_tail_samples() -> usize {
    200
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_percents() -> Vec<f64> {
    vec![7.5, 10.0, 12.5]
}

fn resolve_omega(omega: Option<f64>, omega_pi: Option<f64>) -> Result<f64> {
    let w = match (omega, omega_pi) {
        (Some(w), None) => w,
        (None, Some(k)) => k * PI,
        (None, None) => bail!("give one of omega and omega_pi"),
        (Some(_), Some(_)) => bail!("omega and omega_pi are mutually exclusive"),
    };
    ensure!(w > 0.0 && w.is_finite(), "omega must be positive, got {w}");
    Ok(w)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).context("malformed configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Checks every precondition that downstream code would otherwise reject.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        ensure!(p.nx >= 1 && p.ny >= 1, "nx and ny must be at least 1");
        let [x0, x1, y0, y1] = p.bounds;
        ensure!(x1 > x0 && y1 > y0, "bounds must satisfy xmin < xmax and ymin < ymax");
        self.omega()?;
        if p.medium_file.is_none() {
            self.builtin()?;
        }
        if let Some(s) = &p.source {
            ensure!(s.width > 0.0, "source width must be positive");
        }
        let d = &self.decomposition;
        ensure!(d.jx >= 1 && d.jy >= 1, "jx and jy must be at least 1");
        ensure!(d.jx <= p.nx && d.jy <= p.ny, "more subdomains than element columns or rows");
        ensure!(d.overlap >= 1, "overlap must be at least 1");
        ensure!(d.oversample >= 1, "oversample must be at least 1");
        if let Some(s) = self.strategy()? {
            s.validate().map_err(anyhow::Error::from)?;
        }
        let s = &self.solver;
        ensure!(s.tol > 0.0, "tol must be positive");
        ensure!(s.maxit >= 1, "maxit must be at least 1");
        ensure!(s.restart >= 1, "restart must be at least 1");
        ensure!(self.analysis.iterations >= 1, "analysis needs at least one iteration");
        if let Some(r) = &self.ramp {
            ensure!(!r.points.is_empty(), "ramp needs at least one point");
            for pt in &r.points {
                resolve_omega(pt.omega, pt.omega_pi)?;
                ensure!(pt.nx >= 1 && pt.ny >= 1 && pt.jx >= 1 && pt.jy >= 1, "ramp sizes must be positive");
                ensure!(pt.jx <= pt.nx && pt.jy <= pt.ny, "ramp point has more subdomains than elements");
            }
            for &c in &r.coarse_percents {
                FilterStrategy::Percent(c).validate().map_err(anyhow::Error::from)?;
            }
        }
        Ok(())
    }

    pub fn omega(&self) -> Result<f64> {
        resolve_omega(self.problem.omega, self.problem.omega_pi)
    }

    pub fn bounds(&self) -> Bounds {
        let [a, b, c, d] = self.problem.bounds;
        Bounds::new(a, b, c, d)
    }

    fn builtin(&self) -> Result<BuiltinMedium> {
        let p = &self.problem;
        Ok(BuiltinMedium::from_name(&p.medium, p.bands, p.contrast)?)
    }

    pub fn strategy(&self) -> Result<Option<FilterStrategy>> {
        let v = self.coarse.value;
        Ok(match self.coarse.strategy.as_str() {
            "none" => None,
            "tau" => Some(FilterStrategy::Tau(v)),
            "count" => {
                ensure!(v >= 0.0 && v.fract() == 0.0, "count must be a nonnegative integer");
                Some(FilterStrategy::Count(v as usize))
            }
            "percent" => Some(FilterStrategy::Percent(v)),
            other => bail!("unknown coarse strategy '{other}'"),
        })
    }

    pub fn setup_config(&self) -> Result<SetupConfig> {
        let d = &self.decomposition;
        Ok(SetupConfig {
            jx: d.jx,
            jy: d.jy,
            overlap: d.overlap,
            oversample: d.oversample,
            strategy: self.strategy()?,
            parallel: self.solver.parallel,
        })
    }

    pub fn medium(&self, mesh: &Mesh) -> Result<MediumField> {
        let p = &self.problem;
        let mut m = match &p.medium_file {
            Some(f) => load_medium(self.base_dir.join(f), mesh)?,
            None => builtin_medium(self.builtin()?, mesh)?,
        };
        let src = match &p.source {
            Some(s) => GaussianSource { center: s.center, width: s.width, amplitude: C64::new(s.amplitude, 0.0) },
            None => GaussianSource::near_surface(&mesh.bounds),
        };
        m = m.with_source(src);
        if p.boundary_datum != 0.0 {
            m = m.with_boundary_datum(C64::new(p.boundary_datum, 0.0));
        }
        Ok(m)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output.directory)
    }

    /// Copy of this configuration at one ramp point.
    pub fn at_ramp_point(&self, pt: &RampPoint, strategy: Option<f64>) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        c.problem.omega = Some(resolve_omega(pt.omega, pt.omega_pi)?);
        c.problem.omega_pi = None;
        c.problem.nx = pt.nx;
        c.problem.ny = pt.ny;
        c.decomposition.jx = pt.jx;
        c.decomposition.jy = pt.jy;
        c.coarse = match strategy {
            None => CoarseConfig::default(),
            Some(p) => CoarseConfig { strategy: "percent".into(), value: p },
        };
        c.ramp = None;
        c.validate()?;
        Ok(c)
    }
}
