//! Scenario configuration: a versioned TOML document describing one
//! attractor computation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::dynamics::{BoundSource, HammersteinOperator};
use crate::engine::{L2Mode, DEFAULT_MAX_STEPS};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, QuadratureRule};
use crate::model::{
    seasonal_amplitude, GrowthFamily, GrowthSpec, KernelFamily, KernelSpec, Profile, Schedule,
    SeasonalForcing, Variant,
};
use crate::semilinear::{Nonlinearity, SemilinearSystem};

pub const SCHEMA_VERSION: u32 = 1;

const REQUIRED_KEYS: [&str; 7] = [
    "schema_version",
    "grid",
    "kernel",
    "growth",
    "inhomogeneity",
    "run",
    "initial",
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    grid: RawGrid,
    kernel: RawKernel,
    growth: RawGrowth,
    inhomogeneity: RawForcing,
    run: RawRun,
    initial: RawInitial,
    semilinear: Option<RawSemilinear>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    length: f64,
    nodes: usize,
    #[serde(default = "default_rule")]
    rule: String,
}

fn default_rule() -> String {
    "trapezoid".into()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

impl ScalarOrList {
    fn into_vec(self) -> Vec<f64> {
        match self {
            ScalarOrList::Scalar(v) => vec![v],
            ScalarOrList::List(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    family: String,
    scale: ScalarOrList,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAmplitude {
    Value(f64),
    Keyword(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrowth {
    family: String,
    amplitude: RawAmplitude,
    #[serde(default)]
    modulation: f64,
    #[serde(default = "default_target_ell")]
    target_ell: f64,
    profile: RawProfile,
    profile_sup: Option<f64>,
}

fn default_target_ell() -> f64 {
    0.5
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawProfile {
    Constant { value: f64 },
    AbsLinear { slope: f64, offset: f64 },
    Polynomial { coefficients: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForcing {
    variant: Option<String>,
    amplitudes: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    theta: usize,
    tol: f64,
    #[serde(default = "default_horizon")]
    horizon: usize,
    #[serde(default = "default_certify")]
    certify: String,
    #[serde(default = "default_l2_mode")]
    l2_mode: String,
    #[serde(default = "default_max_steps")]
    max_steps: u64,
    #[serde(default = "default_memory_budget")]
    memory_budget_gib: f64,
}

fn default_horizon() -> usize {
    366
}
fn default_certify() -> String {
    "discrete".into()
}
fn default_l2_mode() -> String {
    "upper-bound".into()
}
fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}
fn default_memory_budget() -> f64 {
    8.0
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawInitial {
    BoundaryPlateau,
    Constant { value: f64 },
    Polynomial { coefficients: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSemilinear {
    matrices: Vec<Vec<Vec<f64>>>,
    nonlinearity: RawNonlinearity,
    #[serde(default = "default_semilinear_tol")]
    tol: f64,
    #[serde(default)]
    initial: Option<Vec<f64>>,
}

fn default_semilinear_tol() -> f64 {
    1e-10
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawNonlinearity {
    Zero,
    Constant { value: Vec<f64> },
    BoundedSigmoid { weights: Vec<Vec<f64>>, offset: Vec<f64> },
}

/// Initial population density.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    /// `2x^2 + 0.5` on `[-1, 1]`, `2.5` elsewhere.
    BoundaryPlateau,
    Constant(f64),
    /// Coefficients in increasing degree.
    Polynomial(Vec<f64>),
}

impl InitialCondition {
    /// Looks up an initial condition by id.
    pub fn from_id(id: &str, params: &[f64]) -> Result<Self> {
        match id {
            "boundary-plateau" => Ok(InitialCondition::BoundaryPlateau),
            "constant" => match params {
                [c] => Ok(InitialCondition::Constant(*c)),
                _ => Err(Error::invalid("constant initial condition takes one value")),
            },
            "polynomial" => Ok(InitialCondition::Polynomial(params.to_vec())),
            other => Err(Error::config("initial.kind", format!("unknown initial condition `{other}`"))),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialCondition::BoundaryPlateau => {
                if x.abs() <= 1.0 {
                    2.0 * x * x + 0.5
                } else {
                    2.5
                }
            }
            InitialCondition::Constant(c) => *c,
            InitialCondition::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &k| acc * x + k),
        }
    }

    pub fn on_grid(&self, grid: &Arc<Grid>) -> GridFunction {
        GridFunction::from_fn(grid, |x| self.eval(x))
    }
}

/// Growth amplitude `C` of `alpha_t = C (1 + modulation sin(2 pi t / theta))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Amplitude {
    Fixed(f64),
    /// Chosen so that the closed-form period product equals `target_ell`.
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ForcingChoice {
    Variant(Variant),
    Amplitudes(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemilinearConfig {
    pub matrices: Vec<DMatrix<f64>>,
    pub nonlinearity: Nonlinearity,
    pub tol: f64,
    pub initial: DVector<f64>,
}

impl SemilinearConfig {
    /// Scalar demo `u_{t+1} = u_t / 2 + 1` with fixed point 2.
    pub fn scalar_demo() -> Self {
        SemilinearConfig {
            matrices: vec![DMatrix::from_element(1, 1, 0.5)],
            nonlinearity: Nonlinearity::Constant(DVector::from_element(1, 1.0)),
            tol: 1e-10,
            initial: DVector::zeros(1),
        }
    }

    pub fn system(&self) -> Result<SemilinearSystem> {
        SemilinearSystem::new(self.matrices.clone(), vec![self.nonlinearity.clone()])
    }
}

/// Validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub length: f64,
    pub nodes: usize,
    pub rule: QuadratureRule,
    pub kernel_family: KernelFamily,
    pub kernel_scale: Vec<f64>,
    pub growth_family: GrowthFamily,
    pub amplitude: Amplitude,
    pub modulation: f64,
    pub target_ell: f64,
    pub profile: Profile,
    pub profile_sup: Option<f64>,
    pub forcing: ForcingChoice,
    pub theta: usize,
    pub tol: f64,
    pub horizon: usize,
    pub certify: BoundSource,
    pub l2_mode: L2Mode,
    pub max_steps: u64,
    pub memory_budget_gib: f64,
    pub initial: InitialCondition,
    pub semilinear: Option<SemilinearConfig>,
}

fn parse_kernel_family(s: &str) -> Result<KernelFamily> {
    match s {
        "laplace" => Ok(KernelFamily::Laplace),
        "gauss" => Ok(KernelFamily::Gauss),
        "tent" => Ok(KernelFamily::Tent),
        other => Err(Error::config("kernel.family", format!("unknown kernel `{other}`"))),
    }
}

fn parse_growth_family(s: &str) -> Result<GrowthFamily> {
    match s {
        "logistic" => Ok(GrowthFamily::Logistic),
        "beverton-holt" => Ok(GrowthFamily::BevertonHolt),
        "ricker" => Ok(GrowthFamily::Ricker),
        other => Err(Error::config("growth.family", format!("unknown growth map `{other}`"))),
    }
}

fn matrix_from_rows(path: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::config(path, "matrix must be square and nonempty"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Parses and validates a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<document>", e.to_string().trim().to_string()))?;
    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !table.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(Error::config(
            "<document>",
            format!("missing required keys: {}", missing.join(", ")),
        ));
    }
    let raw: RawConfig = serde_path_to_error::deserialize(table).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<ScenarioConfig> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(Error::config(
            "schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema_version),
        ));
    }
    let rule = match raw.grid.rule.as_str() {
        "trapezoid" => QuadratureRule::Trapezoid,
        other => return Err(Error::config("grid.rule", format!("unknown quadrature rule `{other}`"))),
    };
    if !(raw.grid.length > 0.0 && raw.grid.length.is_finite()) {
        return Err(Error::config("grid.length", "must be positive"));
    }
    if raw.grid.nodes == 0 {
        return Err(Error::config("grid.nodes", "must be at least 1"));
    }
    let kernel_scale = raw.kernel.scale.into_vec();
    if kernel_scale.is_empty() || kernel_scale.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::config("kernel.scale", "scales must be positive and finite"));
    }
    let amplitude = match raw.growth.amplitude {
        RawAmplitude::Value(c) if c >= 0.0 && c.is_finite() => Amplitude::Fixed(c),
        RawAmplitude::Value(_) => return Err(Error::config("growth.amplitude", "must be nonnegative")),
        RawAmplitude::Keyword(k) if k == "auto" => Amplitude::Auto,
        RawAmplitude::Keyword(k) => {
            return Err(Error::config("growth.amplitude", format!("expected a number or \"auto\", got `{k}`")))
        }
    };
    if !(raw.growth.modulation.abs() < 1.0) {
        return Err(Error::config("growth.modulation", "must lie in (-1, 1)"));
    }
    if !(raw.growth.target_ell > 0.0 && raw.growth.target_ell < 1.0) {
        return Err(Error::config("growth.target_ell", "must lie in (0, 1)"));
    }
    let profile = match raw.growth.profile {
        RawProfile::Constant { value } => Profile::Constant(value),
        RawProfile::AbsLinear { slope, offset } => Profile::AbsLinear { slope, offset },
        RawProfile::Polynomial { coefficients } => Profile::Polynomial(coefficients),
    };
    let forcing = match (raw.inhomogeneity.variant, raw.inhomogeneity.amplitudes) {
        (Some(v), None) => ForcingChoice::Variant(
            Variant::parse(&v)
                .ok_or_else(|| Error::config("inhomogeneity.variant", format!("unknown variant `{v}`")))?,
        ),
        (None, Some(a)) if !a.is_empty() => ForcingChoice::Amplitudes(a),
        _ => {
            return Err(Error::config(
                "inhomogeneity",
                "give exactly one of `variant` or a nonempty `amplitudes` list",
            ))
        }
    };
    if raw.run.theta == 0 {
        return Err(Error::config("run.theta", "period must be at least 1"));
    }
    if !(raw.run.tol > 0.0) {
        return Err(Error::config("run.tol", "tolerance must be positive"));
    }
    let certify = match raw.run.certify.as_str() {
        "discrete" => BoundSource::Discrete,
        "closed-form" => BoundSource::ClosedForm,
        other => return Err(Error::config("run.certify", format!("unknown bound source `{other}`"))),
    };
    let l2_mode = match raw.run.l2_mode.as_str() {
        "upper-bound" => L2Mode::UpperBound,
        "state-dependent" => L2Mode::StateDependent,
        other => return Err(Error::config("run.l2_mode", format!("unknown mode `{other}`"))),
    };
    let initial = match raw.initial {
        RawInitial::BoundaryPlateau => InitialCondition::BoundaryPlateau,
        RawInitial::Constant { value } => InitialCondition::Constant(value),
        RawInitial::Polynomial { coefficients } => InitialCondition::Polynomial(coefficients),
    };
    let semilinear = raw.semilinear.map(validate_semilinear).transpose()?;
    Ok(ScenarioConfig {
        length: raw.grid.length,
        nodes: raw.grid.nodes,
        rule,
        kernel_family: parse_kernel_family(&raw.kernel.family)?,
        kernel_scale,
        growth_family: parse_growth_family(&raw.growth.family)?,
        amplitude,
        modulation: raw.growth.modulation,
        target_ell: raw.growth.target_ell,
        profile,
        profile_sup: raw.growth.profile_sup,
        forcing,
        theta: raw.run.theta,
        tol: raw.run.tol,
        horizon: raw.run.horizon,
        certify,
        l2_mode,
        max_steps: raw.run.max_steps,
        memory_budget_gib: raw.run.memory_budget_gib,
        initial,
        semilinear,
    })
}

fn validate_semilinear(raw: RawSemilinear) -> Result<SemilinearConfig> {
    if raw.matrices.is_empty() {
        return Err(Error::config("semilinear.matrices", "need at least one matrix"));
    }
    let matrices = raw
        .matrices
        .iter()
        .enumerate()
        .map(|(i, rows)| matrix_from_rows(&format!("semilinear.matrices[{i}]"), rows))
        .collect::<Result<Vec<_>>>()?;
    let dim = matrices[0].nrows();
    if matrices.iter().any(|m| m.nrows() != dim) {
        return Err(Error::config("semilinear.matrices", "all matrices must share one dimension"));
    }
    let nonlinearity = match raw.nonlinearity {
        RawNonlinearity::Zero => Nonlinearity::Zero,
        RawNonlinearity::Constant { value } => Nonlinearity::Constant(DVector::from_vec(value)),
        RawNonlinearity::BoundedSigmoid { weights, offset } => Nonlinearity::BoundedSigmoid {
            weights: matrix_from_rows("semilinear.nonlinearity.weights", &weights)?,
            offset: DVector::from_vec(offset),
        },
    };
    if !(raw.tol > 0.0) {
        return Err(Error::config("semilinear.tol", "tolerance must be positive"));
    }
    let initial = match raw.initial {
        Some(v) if v.len() == dim => DVector::from_vec(v),
        Some(_) => return Err(Error::config("semilinear.initial", "wrong dimension")),
        None => DVector::zeros(dim),
    };
    let cfg = SemilinearConfig {
        matrices,
        nonlinearity,
        tol: raw.tol,
        initial,
    };
    cfg.system()
        .map_err(|e| Error::config("semilinear", e.to_string()))?;
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.forcing = ForcingChoice::Variant(variant);
        self
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn label(&self) -> String {
        match &self.forcing {
            ForcingChoice::Variant(v) => v.label().to_string(),
            ForcingChoice::Amplitudes(_) => "custom".to_string(),
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.length, self.nodes, self.rule)
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel_family, Schedule::periodic(self.kernel_scale.clone())?)
    }

    /// Resolves the growth amplitude, solving for it when set to `auto`.
    pub fn resolved_amplitude(&self) -> Result<f64> {
        match self.amplitude {
            Amplitude::Fixed(c) => Ok(c),
            Amplitude::Auto => {
                if self.growth_family == GrowthFamily::Ricker {
                    return Err(Error::config(
                        "growth.amplitude",
                        "`auto` needs a growth map whose Lipschitz constant scales with the rate",
                    ));
                }
                let kernel = self.kernel()?;
                if self.theta % kernel.scale().period() != 0 {
                    return Err(Error::config(
                        "kernel.scale",
                        "kernel scale period must divide run.theta",
                    ));
                }
                let bounds = (0..kernel.scale().period() as i64)
                    .map(|t| kernel.bound(t, self.length))
                    .collect::<Result<Vec<_>>>()?;
                let profile_sup = GrowthSpec::new(
                    self.growth_family,
                    Schedule::constant(1.0),
                    self.profile.clone(),
                    self.length,
                    self.profile_sup,
                )?
                .profile_sup();
                seasonal_amplitude(self.theta, &bounds, profile_sup, self.modulation, self.target_ell)
            }
        }
    }

    pub fn growth(&self) -> Result<GrowthSpec> {
        let c = self.resolved_amplitude()?;
        GrowthSpec::new(
            self.growth_family,
            Schedule::sinusoidal(c, self.modulation, self.theta)?,
            self.profile.clone(),
            self.length,
            self.profile_sup,
        )
    }

    pub fn forcing(&self) -> Result<SeasonalForcing> {
        match &self.forcing {
            ForcingChoice::Variant(v) => SeasonalForcing::variant(*v, self.theta),
            ForcingChoice::Amplitudes(a) => SeasonalForcing::new(a.clone(), self.theta),
        }
    }

    pub fn operator(&self) -> Result<HammersteinOperator> {
        Ok(HammersteinOperator::new(
            self.kernel()?,
            self.growth()?,
            self.forcing()?,
            self.grid()?,
        ))
    }

    /// Warnings that do not block a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let classes = self.kernel_scale.len();
        let bytes = classes as f64 * ((self.nodes + 1) as f64).powi(2) * 8.0;
        let budget = self.memory_budget_gib * (1u64 << 30) as f64;
        if bytes > budget {
            out.push(format!(
                "kernel matrix cache needs {:.2} GiB, above the {:.2} GiB budget",
                bytes / (1u64 << 30) as f64,
                self.memory_budget_gib
            ));
        }
        out
    }
}
