//! Experiment configuration: a single TOML file describing which
//! sub-experiments to run and with what parameters. Unknown keys are
//! rejected so a typo fails the run instead of silently using a default.
//!
//! Every section except `grid` and `potential` is optional; a missing
//! section simply skips that sub-experiment. Sections that need their
//! own discretization (a finer eigensolver grid, say) carry an optional
//! grid override.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sequiv::lattice::{
    KernelNormalization, KernelSpec, KineticConvention, LatticeLagrangian, PotentialSampling,
};
use sequiv::model::{Boundary, GridSpec, Potential, SigmaMap, TimeMode};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Seed for sampled-point checks; fixed seed makes runs repeatable.
    #[serde(default)]
    pub seed: u64,
    /// Fraction of nodes clipped from each edge when comparing kernels.
    #[serde(default = "default_interior_margin")]
    pub interior_margin: f64,
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub sigma: SigmaConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<MomentumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernels: Vec<KernelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lprime: Option<LprimeConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_interior_margin() -> f64 {
    0.125
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Io(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Build every referenced domain object once so a bad config fails
    /// before any work starts.
    pub fn validate(&self) -> CliResult<()> {
        if !(self.interior_margin >= 0.0 && self.interior_margin < 0.5) {
            return Err(CliError::Config(format!(
                "interior_margin must lie in [0, 0.5), got {}",
                self.interior_margin
            )));
        }
        let grid = self.grid.build()?;
        let potential = self.potential.build()?;
        self.potential.check_coverage(&potential, &grid)?;
        self.sigma.build()?;
        if let Some(c) = &self.classical {
            c.validate()?;
        }
        if let Some(m) = &self.momentum {
            m.validate()?;
        }
        if let Some(s) = &self.spectrum {
            if let Some(g) = &s.grid {
                g.build()?;
            }
            if s.operators.is_empty() {
                return Err(CliError::Config("spectrum.operators must not be empty".into()));
            }
        }
        let mut seen = Vec::new();
        for k in &self.kernels {
            if seen.contains(&k.name) {
                return Err(CliError::Config(format!("duplicate kernel name {:?}", k.name)));
            }
            seen.push(k.name.clone());
            k.validate(self)?;
        }
        if let Some(l) = &self.lprime {
            l.validate(self)?;
        }
        Ok(())
    }

    /// Grid for a section, honoring its override.
    pub fn section_grid(&self, over: &Option<GridConfig>) -> CliResult<GridSpec> {
        over.as_ref().unwrap_or(&self.grid).build()
    }

    /// Potential for a section, honoring its override, checked against
    /// the grid it will run on.
    pub fn section_potential(
        &self,
        over: &Option<PotentialConfig>,
        grid: &GridSpec,
    ) -> CliResult<Potential> {
        let cfg = over.as_ref().unwrap_or(&self.potential);
        let p = cfg.build()?;
        cfg.check_coverage(&p, grid)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    Dirichlet,
    Periodic,
}

impl From<BoundaryConfig> for Boundary {
    fn from(b: BoundaryConfig) -> Boundary {
        match b {
            BoundaryConfig::Dirichlet => Boundary::Dirichlet,
            BoundaryConfig::Periodic => Boundary::Periodic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub boundary: BoundaryConfig,
}

impl GridConfig {
    pub fn build(&self) -> CliResult<GridSpec> {
        GridSpec::new(self.x_min, self.x_max, self.n_points, self.boundary.into())
            .map_err(|e| CliError::Config(format!("grid: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Harmonic,
    ShiftedHarmonic,
    QuarticWell,
    Constant,
    Tabulated,
}

/// Potential description. Exactly the parameters of the chosen kind may
/// be present; a stray parameter from another kind is a config error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vs: Option<Vec<f64>>,
    /// Extra width, in position units, the potential must cover beyond
    /// each grid edge. Only bites for tabulated data.
    #[serde(default)]
    pub margin: f64,
}

impl PotentialConfig {
    pub fn harmonic(omega: f64) -> Self {
        PotentialConfig {
            kind: PotentialKind::Harmonic,
            omega: Some(omega),
            offset: None,
            lambda: None,
            value: None,
            xs: None,
            vs: None,
            margin: 0.0,
        }
    }

    pub fn build(&self) -> CliResult<Potential> {
        self.reject_stray_params()?;
        let missing = |name: &str| {
            CliError::Config(format!("potential kind {:?} needs `{name}`", self.kind))
        };
        let built = match self.kind {
            PotentialKind::Harmonic => {
                Potential::harmonic(self.omega.ok_or_else(|| missing("omega"))?)
            }
            PotentialKind::ShiftedHarmonic => Potential::shifted_harmonic(
                self.omega.ok_or_else(|| missing("omega"))?,
                self.offset.ok_or_else(|| missing("offset"))?,
            ),
            PotentialKind::QuarticWell => {
                Potential::quartic_well(self.lambda.ok_or_else(|| missing("lambda"))?)
            }
            PotentialKind::Constant => {
                Potential::constant(self.value.ok_or_else(|| missing("value"))?)
            }
            PotentialKind::Tabulated => Potential::tabulated(
                self.xs.as_deref().ok_or_else(|| missing("xs"))?,
                self.vs.as_deref().ok_or_else(|| missing("vs"))?,
            ),
        };
        built.map_err(|e| CliError::Config(format!("potential: {e}")))
    }

    fn reject_stray_params(&self) -> CliResult<()> {
        let allowed: &[&str] = match self.kind {
            PotentialKind::Harmonic => &["omega"],
            PotentialKind::ShiftedHarmonic => &["omega", "offset"],
            PotentialKind::QuarticWell => &["lambda"],
            PotentialKind::Constant => &["value"],
            PotentialKind::Tabulated => &["xs", "vs"],
        };
        let present: &[(&str, bool)] = &[
            ("omega", self.omega.is_some()),
            ("offset", self.offset.is_some()),
            ("lambda", self.lambda.is_some()),
            ("value", self.value.is_some()),
            ("xs", self.xs.is_some()),
            ("vs", self.vs.is_some()),
        ];
        for (name, here) in present {
            if *here && !allowed.contains(name) {
                return Err(CliError::Config(format!(
                    "potential kind {:?} does not take `{name}`",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    /// The potential must cover the grid, widened by `margin` on each
    /// side.
    pub fn check_coverage(&self, potential: &Potential, grid: &GridSpec) -> CliResult<()> {
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(CliError::Config(format!(
                "potential margin must be finite and nonnegative, got {}",
                self.margin
            )));
        }
        let widened = GridSpec::new(
            grid.x_min() - self.margin,
            grid.x_max() + self.margin,
            grid.n_points(),
            grid.boundary(),
        )
        .map_err(|e| CliError::Config(format!("widened coverage grid: {e}")))?;
        if !potential.covers(&widened) {
            return Err(CliError::Config(format!(
                "potential does not cover [{}, {}]",
                widened.x_min(),
                widened.x_max()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    HalfSquare,
    IdentityAffine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaConfig {
    pub kind: SigmaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Default for SigmaConfig {
    fn default() -> Self {
        SigmaConfig { kind: SigmaKind::HalfSquare, alpha: None, beta: None }
    }
}

impl SigmaConfig {
    pub fn build(&self) -> CliResult<SigmaMap> {
        match self.kind {
            SigmaKind::HalfSquare => {
                if self.alpha.is_some() || self.beta.is_some() {
                    return Err(CliError::Config(
                        "sigma kind half_square takes no parameters".into(),
                    ));
                }
                Ok(SigmaMap::HalfSquare)
            }
            SigmaKind::IdentityAffine => {
                let alpha = self.alpha.ok_or_else(|| {
                    CliError::Config("sigma kind identity_affine needs `alpha`".into())
                })?;
                let beta = self.beta.unwrap_or(0.0);
                if !(alpha.is_finite() && beta.is_finite()) {
                    return Err(CliError::Config(format!(
                        "sigma parameters must be finite, got alpha = {alpha}, beta = {beta}"
                    )));
                }
                Ok(SigmaMap::IdentityAffine { alpha, beta })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_ode_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_n_ics")]
    pub n_initial_conditions: usize,
    #[serde(default = "default_ic_range")]
    pub x_range: [f64; 2],
    #[serde(default = "default_ic_range")]
    pub v_range: [f64; 2],
    /// Deviation threshold the report marks as pass/fail.
    #[serde(default = "default_max_deviation")]
    pub max_deviation: f64,
    #[serde(default = "default_true")]
    pub write_trajectories: bool,
}

fn default_t_final() -> f64 {
    10.0
}
fn default_n_samples() -> usize {
    200
}
fn default_ode_tolerance() -> f64 {
    1e-10
}
fn default_n_ics() -> usize {
    20
}
fn default_ic_range() -> [f64; 2] {
    [-2.0, 2.0]
}
fn default_max_deviation() -> f64 {
    1e-6
}
fn default_true() -> bool {
    true
}

impl ClassicalConfig {
    fn validate(&self) -> CliResult<()> {
        if self.n_initial_conditions == 0 {
            return Err(CliError::Config("classical.n_initial_conditions must be > 0".into()));
        }
        for (name, r) in [("x_range", self.x_range), ("v_range", self.v_range)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
                return Err(CliError::Config(format!(
                    "classical.{name} must be a finite increasing pair, got {r:?}"
                )));
            }
        }
        if !(self.max_deviation > 0.0) {
            return Err(CliError::Config("classical.max_deviation must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumConfig {
    /// Potential values at which the inversion is exercised.
    #[serde(default = "default_v_values")]
    pub v_values: Vec<f64>,
    /// Momentum range for round-trip checks: p' in [-p_max, p_max].
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    #[serde(default = "default_momentum_points")]
    pub n_points: usize,
    /// p'/V ratios probed by the series-order estimate.
    #[serde(default = "default_probe_ratios")]
    pub probe_ratios: [f64; 2],
    #[serde(default = "default_one")]
    pub pde_v: f64,
    #[serde(default = "default_one")]
    pub pde_p: f64,
    #[serde(default = "default_pde_step")]
    pub pde_step: f64,
    #[serde(default = "default_power_law_p")]
    pub power_law_p: f64,
    /// Momentum at which the two subleading coefficient readings are
    /// compared against the exact value.
    #[serde(default = "default_asymptotic_p")]
    pub asymptotic_p: f64,
}

fn default_v_values() -> Vec<f64> {
    vec![1.0]
}
fn default_p_max() -> f64 {
    2.0
}
fn default_momentum_points() -> usize {
    64
}
fn default_probe_ratios() -> [f64; 2] {
    [0.05, 0.025]
}
fn default_one() -> f64 {
    1.0
}
fn default_pde_step() -> f64 {
    1e-3
}
fn default_power_law_p() -> f64 {
    100.0
}
fn default_asymptotic_p() -> f64 {
    1e4
}

impl Default for MomentumConfig {
    fn default() -> Self {
        MomentumConfig {
            v_values: default_v_values(),
            p_max: default_p_max(),
            n_points: default_momentum_points(),
            probe_ratios: default_probe_ratios(),
            pde_v: default_one(),
            pde_p: default_one(),
            pde_step: default_pde_step(),
            power_law_p: default_power_law_p(),
            asymptotic_p: default_asymptotic_p(),
        }
    }
}

impl MomentumConfig {
    fn validate(&self) -> CliResult<()> {
        if self.v_values.is_empty() {
            return Err(CliError::Config("momentum.v_values must not be empty".into()));
        }
        if self.v_values.iter().any(|&v| !(v > 0.0)) {
            return Err(CliError::Config(
                "momentum.v_values must all be positive (the inversion's domain)".into(),
            ));
        }
        if !(self.p_max > 0.0) || self.n_points < 2 {
            return Err(CliError::Config(
                "momentum needs p_max > 0 and n_points >= 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorConfig {
    Base,
    HprimeSpectral,
    HprimeOrdered,
}

impl OperatorConfig {
    pub fn label(&self) -> &'static str {
        match self {
            OperatorConfig::Base => "base",
            OperatorConfig::HprimeSpectral => "hprime_spectral",
            OperatorConfig::HprimeOrdered => "hprime_ordered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_n_levels")]
    pub n_levels: usize,
    #[serde(default = "default_operators")]
    pub operators: Vec<OperatorConfig>,
    #[serde(default = "default_true")]
    pub write_csv: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

fn default_n_levels() -> usize {
    8
}
fn default_operators() -> Vec<OperatorConfig> {
    vec![OperatorConfig::Base]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagrangianConfig {
    Base,
    Derived,
}

impl LagrangianConfig {
    pub fn label(&self) -> &'static str {
        match self {
            LagrangianConfig::Base => "base",
            LagrangianConfig::Derived => "derived",
        }
    }
}

impl From<LagrangianConfig> for LatticeLagrangian {
    fn from(l: LagrangianConfig) -> Self {
        match l {
            LagrangianConfig::Base => LatticeLagrangian::Base,
            LagrangianConfig::Derived => LatticeLagrangian::Derived,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeModeConfig {
    RealTime,
    Euclidean,
}

impl TimeModeConfig {
    pub fn label(&self) -> &'static str {
        match self {
            TimeModeConfig::RealTime => "real_time",
            TimeModeConfig::Euclidean => "euclidean",
        }
    }
}

impl From<TimeModeConfig> for TimeMode {
    fn from(m: TimeModeConfig) -> Self {
        match m {
            TimeModeConfig::RealTime => TimeMode::RealTime,
            TimeModeConfig::Euclidean => TimeMode::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationConfig {
    GaussianConstant,
    StationaryPhase,
    ColumnSumCalibrated,
}

impl NormalizationConfig {
    pub fn label(&self) -> &'static str {
        match self {
            NormalizationConfig::GaussianConstant => "gaussian_constant",
            NormalizationConfig::StationaryPhase => "stationary_phase",
            NormalizationConfig::ColumnSumCalibrated => "column_sum_calibrated",
        }
    }
}

impl From<NormalizationConfig> for KernelNormalization {
    fn from(n: NormalizationConfig) -> Self {
        match n {
            NormalizationConfig::GaussianConstant => KernelNormalization::GaussianConstant,
            NormalizationConfig::StationaryPhase => KernelNormalization::StationaryPhase,
            NormalizationConfig::ColumnSumCalibrated => KernelNormalization::ColumnSumCalibrated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingConfig {
    Midpoint,
    LeftEndpoint,
    EndpointAverage,
}

impl SamplingConfig {
    pub fn label(&self) -> &'static str {
        match self {
            SamplingConfig::Midpoint => "midpoint",
            SamplingConfig::LeftEndpoint => "left_endpoint",
            SamplingConfig::EndpointAverage => "endpoint_average",
        }
    }
}

impl From<SamplingConfig> for PotentialSampling {
    fn from(s: SamplingConfig) -> Self {
        match s {
            SamplingConfig::Midpoint => PotentialSampling::Midpoint,
            SamplingConfig::LeftEndpoint => PotentialSampling::LeftEndpoint,
            SamplingConfig::EndpointAverage => PotentialSampling::EndpointAverage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KineticConventionConfig {
    Standard,
    UnhalvedSqrtPrefactor,
}

impl From<KineticConventionConfig> for KineticConvention {
    fn from(k: KineticConventionConfig) -> Self {
        match k {
            KineticConventionConfig::Standard => KineticConvention::Standard,
            KineticConventionConfig::UnhalvedSqrtPrefactor => {
                KineticConvention::UnhalvedSqrtPrefactor
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceConfig {
    SpectralBase,
    SpectralHprime,
    OrderedHprime,
}

impl ReferenceConfig {
    pub fn label(&self) -> &'static str {
        match self {
            ReferenceConfig::SpectralBase => "spectral_base",
            ReferenceConfig::SpectralHprime => "spectral_hprime",
            ReferenceConfig::OrderedHprime => "ordered_hprime",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub name: String,
    pub lagrangian: LagrangianConfig,
    pub mode: TimeModeConfig,
    #[serde(default = "default_normalization")]
    pub normalization: NormalizationConfig,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingConfig,
    #[serde(default = "default_kinetic_convention")]
    pub kinetic_convention: KineticConventionConfig,
    #[serde(default)]
    pub regulator: f64,
    pub t_total: f64,
    pub n_steps: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<ReferenceConfig>,
    /// When present, the fitted order against the first reference must
    /// land in this window for the report to mark the kernel as passing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_order: Option<[f64; 2]>,
    /// When true, the report checks that the error against the first
    /// reference decreases at every refinement.
    #[serde(default)]
    pub expect_monotone: bool,
    #[serde(default)]
    pub write_matrices: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
}

fn default_normalization() -> NormalizationConfig {
    NormalizationConfig::GaussianConstant
}
fn default_sampling() -> SamplingConfig {
    SamplingConfig::Midpoint
}
fn default_kinetic_convention() -> KineticConventionConfig {
    KineticConventionConfig::Standard
}

impl KernelConfig {
    fn validate(&self, root: &ExperimentConfig) -> CliResult<()> {
        if self.name.is_empty() {
            return Err(CliError::Config("kernel name must not be empty".into()));
        }
        if self.n_steps.is_empty() || self.n_steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config(format!(
                "kernel {:?}: n_steps must be nonempty and strictly increasing",
                self.name
            )));
        }
        if self.n_steps[0] == 0 {
            return Err(CliError::Config(format!(
                "kernel {:?}: n_steps must be positive",
                self.name
            )));
        }
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return Err(CliError::Config(format!(
                "kernel {:?}: t_total must be positive",
                self.name
            )));
        }
        if let Some(w) = self.expect_order {
            if !(w[0].is_finite() && w[1].is_finite() && w[0] < w[1]) {
                return Err(CliError::Config(format!(
                    "kernel {:?}: expect_order must be an increasing pair",
                    self.name
                )));
            }
        }
        let grid = root.section_grid(&self.grid)?;
        let pot = root.section_potential(&self.potential, &grid)?;
        // Run lattice-level validation (regulator range, convention
        // rules, coverage) now so a bad kernel fails at load time.
        self.to_kernel_spec(pot, self.n_steps[0])
            .validate(&grid)
            .map_err(|e| CliError::Config(format!("kernel {:?}: {e}", self.name)))
    }

    pub fn to_kernel_spec(&self, potential: Potential, n: usize) -> KernelSpec {
        KernelSpec {
            lagrangian: self.lagrangian.into(),
            potential,
            dt: self.t_total / n as f64,
            mode: self.mode.into(),
            normalization: self.normalization.into(),
            regulator: self.regulator,
            potential_sampling: self.sampling.into(),
            kinetic_convention: self.kinetic_convention.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LprimeConfig {
    #[serde(default = "default_one")]
    pub t_total: f64,
    #[serde(default = "default_lattice_steps")]
    pub n_steps: Vec<usize>,
    #[serde(default = "default_lprime_regulator")]
    pub regulator: f64,
    #[serde(default = "default_sampling")]
    pub sampling: SamplingConfig,
    #[serde(default = "default_references")]
    pub references: Vec<ReferenceConfig>,
    #[serde(default)]
    pub write_matrices: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlConfig>,
}

fn default_lattice_steps() -> Vec<usize> {
    vec![8, 16, 32, 64]
}
fn default_lprime_regulator() -> f64 {
    0.2
}
fn default_references() -> Vec<ReferenceConfig> {
    vec![
        ReferenceConfig::SpectralBase,
        ReferenceConfig::SpectralHprime,
        ReferenceConfig::OrderedHprime,
    ]
}

impl LprimeConfig {
    fn validate(&self, root: &ExperimentConfig) -> CliResult<()> {
        if self.n_steps.is_empty() || self.n_steps[0] == 0
            || self.n_steps.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(CliError::Config(
                "lprime.n_steps must be positive and strictly increasing".into(),
            ));
        }
        if !(self.t_total > 0.0) {
            return Err(CliError::Config("lprime.t_total must be positive".into()));
        }
        if !(self.regulator > 0.0 && self.regulator.is_finite()) {
            return Err(CliError::Config(
                "lprime.regulator must be positive; the unregulated comparison drowns in \
                 box reflections"
                    .into(),
            ));
        }
        if self.references.is_empty() {
            return Err(CliError::Config("lprime.references must not be empty".into()));
        }
        let grid = root.section_grid(&self.grid)?;
        root.section_potential(&self.potential, &grid)?;
        if let Some(c) = &self.control {
            c.validate()?;
        }
        Ok(())
    }
}

/// The known-good companion run: a base-action lattice whose behavior
/// is understood, executed alongside the derived-action measurement so
/// the pipeline itself is checked in the same report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default = "default_one")]
    pub t_total: f64,
    #[serde(default = "default_lattice_steps")]
    pub n_steps: Vec<usize>,
    #[serde(default = "default_lprime_regulator")]
    pub regulator: f64,
    #[serde(default = "default_order_window")]
    pub order_window: [f64; 2],
    #[serde(default = "default_control_potential")]
    pub potential: PotentialConfig,
    #[serde(default = "default_control_euclid_grid")]
    pub euclid_grid: GridConfig,
    #[serde(default = "default_control_realtime_grid")]
    pub realtime_grid: GridConfig,
}

fn default_control_potential() -> PotentialConfig {
    PotentialConfig::harmonic(1.0)
}
fn default_control_euclid_grid() -> GridConfig {
    GridConfig { x_min: -8.0, x_max: 8.0, n_points: 256, boundary: BoundaryConfig::Periodic }
}
fn default_control_realtime_grid() -> GridConfig {
    GridConfig { x_min: -6.0, x_max: 6.0, n_points: 256, boundary: BoundaryConfig::Periodic }
}
fn default_order_window() -> [f64; 2] {
    [0.8, 1.2]
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            potential: default_control_potential(),
            euclid_grid: default_control_euclid_grid(),
            realtime_grid: default_control_realtime_grid(),
            t_total: default_one(),
            n_steps: default_lattice_steps(),
            regulator: default_lprime_regulator(),
            order_window: default_order_window(),
        }
    }
}

impl ControlConfig {
    fn validate(&self) -> CliResult<()> {
        let euclid = self.euclid_grid.build()?;
        let realtime = self.realtime_grid.build()?;
        let pot = self.potential.build()?;
        self.potential.check_coverage(&pot, &euclid)?;
        self.potential.check_coverage(&pot, &realtime)?;
        if self.n_steps.len() < 2 || self.n_steps[0] == 0
            || self.n_steps.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(CliError::Config(
                "control.n_steps needs at least two strictly increasing positive entries".into(),
            ));
        }
        if !(self.order_window[0] < self.order_window[1]) {
            return Err(CliError::Config("control.order_window must increase".into()));
        }
        if !(self.regulator > 0.0) {
            return Err(CliError::Config("control.regulator must be positive".into()));
        }
        if !(self.t_total > 0.0) {
            return Err(CliError::Config("control.t_total must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub directory: String,
    /// Emit full kernel matrices as CSV; large, so off by default.
    #[serde(default)]
    pub write_matrices: bool,
}

fn default_out_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: default_out_dir(), write_matrices: false }
    }
}

#[cfg(test)]
pub fn minimal_config_for_tests() -> ExperimentConfig {
    toml::from_str(
        r#"
        [grid]
        x_min = -8.0
        x_max = 8.0
        n_points = 64
        boundary = "periodic"

        [potential]
        kind = "harmonic"
        omega = 1.0
    "#,
    )
    .expect("the minimal fixture config parses")
}
