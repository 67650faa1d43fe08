//! Config-driven experiment runner: solve, reconstruct a flux, evaluate both
//! bounds and the indicators, then write CSV/JSON tables.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discretization::{
    build_space_time_grid, solve_parabolic, true_error_components, ErrorComponents, ErrorOptions, Scheme,
    SpaceTimeField,
};
use crate::error::{Error, Result};
use crate::flux::{enrich_flux, minimize_flux, patch_average_flux, FluxField, FluxOptions, FluxScope};
use crate::indicators::{bulk_mark, element_indicator, spearman, strong_measure, weak_measure, MarkSet};
use crate::majorant::{
    majorant_general, majorant_incremental, two_sided_weights, BetaPolicy, MajorantBreakdown, MajorantParams, MuMode,
    SourceMode,
};
use crate::minorant::{
    maximize_minorant, minorant_incremental, minorant_value, reaction_vanishes, MinorantBreakdown, MinorantParams,
};
use crate::problem::{efficiency_indexes, embedding_constants, preset_problem, PresetId};

/// Relative slack below which a bound counts as violated.
pub const GUARANTEE_TOL: f64 = 1e-9;
/// M̄² ≤ EXACT_TOL·[u]² marks the approximation as exact.
pub const EXACT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluxMode {
    #[serde(rename = "average")]
    Average,
    #[serde(rename = "optimize")]
    Optimize,
    #[serde(rename = "optimize+enrich")]
    OptimizeEnrich,
}

impl fmt::Display for FluxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FluxMode::Average => "average",
            FluxMode::Optimize => "optimize",
            FluxMode::OptimizeEnrich => "optimize+enrich",
        })
    }
}

impl FromStr for FluxMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "average" | "avg" => Ok(FluxMode::Average),
            "optimize" | "opt" => Ok(FluxMode::Optimize),
            "optimize+enrich" | "enrich" => Ok(FluxMode::OptimizeEnrich),
            other => Err(Error::Config(format!("unknown flux mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuChoice {
    Zero,
    One,
    /// Pointwise optimal μ̂.
    Optimal,
}

impl MuChoice {
    pub fn mode(self) -> MuMode {
        match self {
            MuChoice::Zero => MuMode::Zero,
            MuChoice::One => MuMode::One,
            MuChoice::Optimal => MuMode::OptimalMuHat,
        }
    }
}

impl fmt::Display for MuChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MuChoice::Zero => "zero",
            MuChoice::One => "one",
            MuChoice::Optimal => "optimal",
        })
    }
}

impl FromStr for MuChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" | "0" => Ok(MuChoice::Zero),
            "one" | "1" => Ok(MuChoice::One),
            "optimal" | "hat" | "mu_hat" => Ok(MuChoice::Optimal),
            other => Err(Error::Config(format!("unknown μ mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproximationKind {
    /// Implicit FEM solution.
    #[default]
    Fem,
    /// Nodal interpolant of the exact solution.
    ExactInterpolant,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MajorantConfig {
    pub delta: f64,
    pub gamma: f64,
    pub mu: MuChoice,
    /// Fixed β on every slab; the balancing β per slab when absent.
    pub beta: Option<f64>,
}

impl Default for MajorantConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            gamma: 1.0,
            mu: MuChoice::Zero,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinorantConfig {
    pub enabled: bool,
    /// ϰ of the two-sided norm; κ follows from it, δ and γ.
    pub kappa: f64,
    pub bubbles: bool,
}

impl Default for MinorantConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            kappa: 1e-3,
            bubbles: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndicatorConfig {
    pub theta: Vec<f64>,
    /// Slab indices k of Ω×(t^k, t^{k+1}).
    pub slabs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub space_points: usize,
    pub time_points: usize,
    /// Points per direction for the true error.
    pub error_points: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            space_points: 3,
            time_points: 3,
            error_points: 4,
        }
    }
}

/// One sweep axis; a config with several axes runs their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Delta(Vec<f64>),
    Gamma(Vec<f64>),
    /// Ex2 reaction scale.
    Rho(Vec<f64>),
    /// Width of the Gaussian presets.
    Sigma(Vec<f64>),
    Kappa(Vec<f64>),
    Mesh(Vec<Vec<usize>>),
    Slabs(Vec<usize>),
    /// Mesh and slab count changed together, e.g. `[[[20], 20], [[40], 40]]`.
    MeshSlabs(Vec<(Vec<usize>, usize)>),
    Mu(Vec<MuChoice>),
    Flux(Vec<FluxMode>),
}

impl SweepAxis {
    fn len(&self) -> usize {
        match self {
            SweepAxis::Delta(v) | SweepAxis::Gamma(v) | SweepAxis::Rho(v) | SweepAxis::Sigma(v) | SweepAxis::Kappa(v) => {
                v.len()
            }
            SweepAxis::Mesh(v) => v.len(),
            SweepAxis::Slabs(v) => v.len(),
            SweepAxis::MeshSlabs(v) => v.len(),
            SweepAxis::Mu(v) => v.len(),
            SweepAxis::Flux(v) => v.len(),
        }
    }

    /// Sets value `i` of the axis and returns its label.
    fn apply(&self, i: usize, c: &mut ExperimentConfig) -> Result<String> {
        Ok(match self {
            SweepAxis::Delta(v) => {
                c.majorant.delta = v[i];
                format!("delta={}", v[i])
            }
            SweepAxis::Gamma(v) => {
                c.majorant.gamma = v[i];
                format!("gamma={}", v[i])
            }
            SweepAxis::Rho(v) => {
                match &mut c.preset {
                    PresetId::Ex2 { rho } => *rho = v[i],
                    p => return Err(Error::Config(format!("rho sweep needs an ex2 preset, got {p}"))),
                }
                format!("rho={}", v[i])
            }
            SweepAxis::Sigma(v) => {
                match &mut c.preset {
                    PresetId::Ex1Gaussian { sigma } => *sigma = v[i],
                    PresetId::Ex3 { sigma } => *sigma = Some(v[i]),
                    p => return Err(Error::Config(format!("sigma sweep needs a Gaussian preset, got {p}"))),
                }
                format!("sigma={}", v[i])
            }
            SweepAxis::Kappa(v) => {
                c.minorant.kappa = v[i];
                format!("kappa={}", v[i])
            }
            SweepAxis::Mesh(v) => {
                c.mesh = v[i].clone();
                format!(
                    "mesh={}",
                    v[i].iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
                )
            }
            SweepAxis::Slabs(v) => {
                c.slabs = v[i];
                format!("slabs={}", v[i])
            }
            SweepAxis::MeshSlabs(v) => {
                let (mesh, k) = &v[i];
                c.mesh = mesh.clone();
                c.slabs = *k;
                format!("mesh={},slabs={k}", mesh.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x"))
            }
            SweepAxis::Mu(v) => {
                c.majorant.mu = v[i];
                format!("mu={}", v[i])
            }
            SweepAxis::Flux(v) => {
                c.flux = v[i];
                format!("flux={}", v[i])
            }
        })
    }
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub preset: PresetId,
    /// Cells per axis.
    pub mesh: Vec<usize>,
    pub slabs: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub approximation: ApproximationKind,
    #[serde(default = "default_flux")]
    pub flux: FluxMode,
    /// Patch Gauss–Seidel sweeps instead of the global flux solve.
    #[serde(default)]
    pub flux_sweeps: Option<usize>,
    #[serde(default)]
    pub majorant: MajorantConfig,
    #[serde(default)]
    pub minorant: MinorantConfig,
    #[serde(default)]
    pub indicators: IndicatorConfig,
    /// Report every `report_stride`-th level plus the last one.
    #[serde(default = "default_stride")]
    pub report_stride: usize,
    /// Explicit reporting levels; overrides the stride.
    #[serde(default)]
    pub report_levels: Option<Vec<usize>>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    /// Recorded with the run; the pipeline itself is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
}

fn default_flux() -> FluxMode {
    FluxMode::Optimize
}

impl ExperimentConfig {
    pub fn new(name: impl Into<String>, preset: PresetId, mesh: Vec<usize>, slabs: usize) -> Self {
        Self {
            name: name.into(),
            preset,
            mesh,
            slabs,
            scheme: Scheme::default(),
            approximation: ApproximationKind::default(),
            flux: default_flux(),
            flux_sweeps: None,
            majorant: MajorantConfig::default(),
            minorant: MinorantConfig::default(),
            indicators: IndicatorConfig::default(),
            report_stride: 1,
            report_levels: None,
            quadrature: QuadratureConfig::default(),
            seed: 0,
            output: None,
            format: OutputFormat::default(),
            sweep: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh.len() != self.preset.dim() {
            return Err(Error::Config(format!(
                "preset {} is {}-dimensional but mesh has {} counts",
                self.preset,
                self.preset.dim(),
                self.mesh.len()
            )));
        }
        if self.mesh.iter().any(|&n| n == 0) || self.slabs == 0 {
            return Err(Error::Config("mesh counts and slabs must be positive".into()));
        }
        if self.report_stride == 0 {
            return Err(Error::Config("report_stride must be positive".into()));
        }
        if let Some(levels) = &self.report_levels {
            if let Some(k) = levels.iter().find(|&&k| k > self.slabs) {
                return Err(Error::Config(format!("report level {k} exceeds {} slabs", self.slabs)));
            }
        }
        if let Some(t) = self.indicators.theta.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Config(format!("θ must lie in (0,1), got {t}")));
        }
        if let Some(k) = self.indicators.slabs.iter().find(|&&k| k >= self.slabs) {
            return Err(Error::Config(format!("indicator slab {k} out of range for {} slabs", self.slabs)));
        }
        let q = &self.quadrature;
        if q.space_points == 0 || q.time_points == 0 || q.error_points == 0 {
            return Err(Error::Config("quadrature orders must be positive".into()));
        }
        if self.sweep.iter().any(|a| a.len() == 0) {
            return Err(Error::Config("sweep axes must not be empty".into()));
        }
        Ok(())
    }

    /// Levels that get a report row.
    pub fn reporting_levels(&self) -> Vec<usize> {
        if let Some(l) = &self.report_levels {
            return l.clone();
        }
        let mut out: Vec<usize> = (1..=self.slabs).step_by(1).filter(|k| k % self.report_stride == 0).collect();
        if out.last() != Some(&self.slabs) {
            out.push(self.slabs);
        }
        out
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every combination of the sweep axes, labelled.
    pub fn expand(&self) -> Result<Vec<(String, ExperimentConfig)>> {
        let mut out = vec![(String::new(), ExperimentConfig { sweep: Vec::new(), ..self.clone() })];
        for axis in &self.sweep {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for (label, base) in &out {
                for i in 0..axis.len() {
                    let mut c = base.clone();
                    let part = axis.apply(i, &mut c)?;
                    let label = if label.is_empty() { part } else { format!("{label},{part}") };
                    c.name = format!("{}[{label}]", self.name);
                    next.push((label, c));
                }
            }
            out = next;
        }
        Ok(out)
    }
}

/// Command-line overrides of config keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub preset: Option<PresetId>,
    pub mesh: Option<Vec<usize>>,
    pub slabs: Option<usize>,
    pub flux: Option<FluxMode>,
    pub mu: Option<MuChoice>,
    pub kappa: Option<f64>,
    pub theta: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub output: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(p) = self.preset {
            c.preset = p;
        }
        if let Some(m) = &self.mesh {
            c.mesh = m.clone();
        }
        if let Some(k) = self.slabs {
            c.slabs = k;
        }
        if let Some(f) = self.flux {
            c.flux = f;
        }
        if let Some(m) = self.mu {
            c.majorant.mu = m;
        }
        if let Some(k) = self.kappa {
            c.minorant.kappa = k;
        }
        if let Some(t) = &self.theta {
            c.indicators.theta = t.clone();
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(f) = self.format {
            c.format = f;
        }
        if let Some(o) = &self.output {
            c.output = Some(o.clone());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajorantTerms {
    pub initial: f64,
    pub reaction: f64,
    pub friedrichs: f64,
    pub flux: f64,
    pub boundary: f64,
}

/// One reporting level t^k; bounds and errors cover (0, t^k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub k: usize,
    pub t: f64,
    pub error: ErrorComponents,
    /// Error in the norm the majorant bounds.
    pub err_sq: f64,
    /// Error in the norm the minorant bounds.
    pub err_min_sq: Option<f64>,
    /// [u]² in the majorant norm, the normalizer of the *_rel columns.
    pub exact_sq: f64,
    pub maj_sq: f64,
    pub maj_terms: MajorantTerms,
    pub min_sq: Option<f64>,
    pub i_maj: Option<f64>,
    pub i_min: Option<f64>,
    /// √(M̄²/M_²).
    pub i_eff: Option<f64>,
    /// M̄²/M_².
    pub i_eff_sq: Option<f64>,
    pub err_rel: Option<f64>,
    pub maj_rel: Option<f64>,
    pub min_rel: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Majorant,
    Minorant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: usize,
    pub bound: BoundKind,
    pub bound_sq: f64,
    pub err_sq: f64,
    /// (bound − err)/err for the majorant, (err − bound)/err for the minorant.
    pub rel_slack: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IncrementalCheck {
    /// Largest relative gap between the incremental and quadrature majorants.
    pub majorant_rel_diff: Option<f64>,
    pub minorant_rel_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkComparison {
    pub theta: f64,
    pub from_error: MarkSet,
    pub from_indicator: MarkSet,
    pub weak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabIndicators {
    pub slab: usize,
    /// ∫∫ A∇e·∇e per element.
    pub err: Vec<f64>,
    pub ind: Vec<f64>,
    pub strong_global: Option<f64>,
    pub spearman: Option<f64>,
    pub marks: Vec<MarkComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_sha256: String,
    pub version: String,
    pub seed: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub metadata: RunMetadata,
    pub rows: Vec<LevelRow>,
    pub majorant: Option<MajorantBreakdown>,
    pub minorant: Option<MinorantBreakdown>,
    pub incremental: IncrementalCheck,
    pub indicators: Vec<SlabIndicators>,
    pub violations: Vec<Violation>,
    /// The majorant vanishes up to EXACT_TOL, so v is the exact solution.
    pub exact: bool,
}

impl Report {
    /// A report without any computed rows.
    pub fn empty(config: ExperimentConfig) -> Self {
        Self {
            metadata: RunMetadata {
                config_sha256: config.hash(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed: config.seed,
                wall_time_s: 0.0,
            },
            config,
            rows: Vec::new(),
            majorant: None,
            minorant: None,
            incremental: IncrementalCheck::default(),
            indicators: Vec::new(),
            violations: Vec::new(),
            exact: false,
        }
    }

    pub fn final_row(&self) -> Option<&LevelRow> {
        self.rows.last()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

fn build_flux(
    v: &SpaceTimeField,
    spec: &crate::problem::ProblemSpec,
    constants: &crate::problem::EmbeddingConstants,
    params: &MajorantParams,
    config: &ExperimentConfig,
) -> Result<FluxField> {
    let avg = patch_average_flux(v, spec, config.quadrature.space_points)?;
    let opts = FluxOptions {
        scope: match config.flux_sweeps {
            Some(n) => FluxScope::PatchSweeps(n),
            None => FluxScope::Global,
        },
        ..FluxOptions::default()
    };
    match config.flux {
        FluxMode::Average => Ok(avg),
        FluxMode::Optimize => minimize_flux(v, &avg, spec, constants, params, &opts),
        FluxMode::OptimizeEnrich => {
            let y = minimize_flux(v, &avg, spec, constants, params, &opts)?;
            enrich_flux(&y, v, spec, constants, params, &opts)
        }
    }
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .skip(1)
        .map(|(x, y)| if *y == 0.0 { (x - y).abs() } else { ((x - y) / y).abs() })
        .fold(0.0, f64::max)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    config.validate()?;
    if !config.sweep.is_empty() {
        return Err(Error::Config("config has sweep axes; run it as a sweep".into()));
    }
    let (spec, exact) = preset_problem(config.preset)?;
    let constants = embedding_constants(&spec)?;
    let grid = build_space_time_grid(&spec, &config.mesh, config.slabs)?;
    let v = match config.approximation {
        ApproximationKind::Fem => solve_parabolic(&spec, &grid, config.scheme)?,
        ApproximationKind::ExactInterpolant => SpaceTimeField::interpolate(grid.clone(), &exact.u),
    };
    let q = &config.quadrature;
    let te = true_error_components(
        &v,
        &exact,
        &spec,
        &grid,
        ErrorOptions {
            space_points: q.error_points,
            time_points: q.error_points,
            element_wise: !config.indicators.slabs.is_empty(),
        },
    )?;

    let mc = &config.majorant;
    let params = MajorantParams {
        delta: mc.delta,
        gamma: mc.gamma,
        mu: mc.mu.mode(),
        beta: match mc.beta {
            Some(b) => BetaPolicy::Fixed(b),
            None => BetaPolicy::Optimal,
        },
        space_points: q.space_points,
        time_points: q.time_points,
        ..MajorantParams::default()
    };
    let y = build_flux(&v, &spec, &constants, &params, config)?;
    let maj = majorant_general(&v, &y, &spec, &grid, &constants, &params)?;

    let mut incremental = IncrementalCheck::default();
    if mc.mu == MuChoice::Zero && mc.delta == 1.0 {
        let betas: Vec<f64> = maj.slabs.iter().map(|s| s.beta).collect();
        match majorant_incremental(&v, &y, &spec, &constants, &betas, q.space_points) {
            Ok(inc) => {
                let p = MajorantParams {
                    source: SourceMode::Interpolated,
                    beta: BetaPolicy::PerSlab(betas),
                    ..params.clone()
                };
                let gen = majorant_general(&v, &y, &spec, &grid, &constants, &p)?;
                incremental.majorant_rel_diff = Some(max_rel_diff(&inc, &gen.per_level()));
            }
            Err(Error::NotIncremental(_)) => {}
            Err(e) => return Err(e),
        }
    }

    let mut min_params = None;
    let mut minorant = None;
    if config.minorant.enabled {
        let mut ts = two_sided_weights(config.minorant.kappa, mc.delta, &constants, spec.diffusion.nu1)?;
        if !reaction_vanishes(&spec, &grid) {
            ts = ts.with_reaction(mc.gamma);
        }
        let mp = MinorantParams {
            bubbles: config.minorant.bubbles,
            space_points: q.space_points,
            time_points: q.time_points,
            ..MinorantParams::new(ts.kappa)
        };
        let (eta, mb) = maximize_minorant(&v, &spec, &grid, &mp)?;
        let ip = MinorantParams {
            source: SourceMode::Interpolated,
            ..mp
        };
        match minorant_incremental(&v, &eta, &spec, &ip) {
            Ok(inc) => {
                let gen = minorant_value(&v, &eta, &spec, &ip)?;
                incremental.minorant_rel_diff = Some(max_rel_diff(&inc, &gen.per_level()));
            }
            Err(Error::NotIncremental(_)) => {}
            Err(e) => return Err(e),
        }
        min_params = Some(mp);
        minorant = Some(mb);
    }

    let wmaj = params.norm_weights();
    let wmin = min_params.as_ref().map(|p| p.norm_weights());
    let maj_levels = maj.per_level();
    let mut violations = Vec::new();
    for k in 0..=config.slabs {
        let cum = te.cumulative(k);
        let err = cum.weighted(&wmaj);
        let floor = 1e-15 * te.exact_cumulative(k).weighted(&wmaj);
        if maj_levels[k] < err * (1.0 - GUARANTEE_TOL) - floor {
            violations.push(Violation {
                k,
                bound: BoundKind::Majorant,
                bound_sq: maj_levels[k],
                err_sq: err,
                rel_slack: (maj_levels[k] - err) / err,
            });
        }
        if let (Some(mb), Some(w)) = (&minorant, &wmin) {
            let err = cum.weighted(w);
            let m = mb.cumulative(k);
            if m > err * (1.0 + GUARANTEE_TOL) + floor {
                violations.push(Violation {
                    k,
                    bound: BoundKind::Minorant,
                    bound_sq: m,
                    err_sq: err,
                    rel_slack: (err - m) / err.max(f64::MIN_POSITIVE),
                });
            }
        }
    }

    let rows = config
        .reporting_levels()
        .into_iter()
        .map(|k| {
            let cum = te.cumulative(k);
            let err_sq = cum.weighted(&wmaj);
            let exact_sq = te.exact_cumulative(k).weighted(&wmaj);
            let maj_sq = maj_levels[k];
            let terms = maj.cumulative_terms(k);
            let min_sq = minorant.as_ref().map(|m| m.cumulative(k));
            let err_min_sq = wmin.as_ref().map(|w| cum.weighted(w));
            let idx = efficiency_indexes(maj_sq, min_sq.unwrap_or(0.0), err_sq).ok();
            let i_min = match (min_sq, err_min_sq) {
                (Some(m), Some(e)) => efficiency_indexes(maj_sq, m, e).ok().map(|x| x.i_min),
                _ => None,
            };
            LevelRow {
                k,
                t: grid.time.t(k),
                error: cum,
                err_sq,
                err_min_sq,
                exact_sq,
                maj_sq,
                maj_terms: MajorantTerms {
                    initial: maj.initial_term,
                    reaction: terms[0],
                    friedrichs: terms[1],
                    flux: terms[2],
                    boundary: terms[3],
                },
                min_sq,
                i_maj: idx.map(|x| x.i_maj),
                i_min,
                i_eff: if min_sq.is_some() { idx.and_then(|x| x.i_eff) } else { None },
                i_eff_sq: min_sq.and_then(|m| ratio(maj_sq, m)),
                err_rel: ratio(err_sq, exact_sq),
                maj_rel: ratio(maj_sq, exact_sq),
                min_rel: min_sq.and_then(|m| ratio(m, exact_sq)),
            }
        })
        .collect::<Vec<_>>();

    let indicators = config
        .indicators
        .slabs
        .iter()
        .map(|&k| {
            let ind = element_indicator(&v, &y, &spec, k, q.space_points)?;
            let err = te.element_grad[k].clone();
            let marks = config
                .indicators
                .theta
                .iter()
                .map(|&theta| {
                    let from_error = bulk_mark(&err, theta)?;
                    let from_indicator = bulk_mark(&ind.values, theta)?;
                    let weak = weak_measure(&from_error, &from_indicator)?;
                    Ok(MarkComparison {
                        theta,
                        from_error,
                        from_indicator,
                        weak,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SlabIndicators {
                slab: k,
                strong_global: strong_measure(err.iter().sum(), ind.total).ok(),
                spearman: spearman(&err, &ind.values).ok(),
                err,
                ind: ind.values,
                marks,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let final_maj = maj_levels[config.slabs];
    let final_exact = te.exact_cumulative(config.slabs).weighted(&wmaj);
    let exact_flag = final_maj == 0.0 || final_maj <= EXACT_TOL * final_exact;

    Ok(Report {
        config: config.clone(),
        metadata: RunMetadata {
            config_sha256: config.hash(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        rows,
        majorant: Some(maj),
        minorant,
        incremental,
        indicators,
        violations,
        exact: exact_flag,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub label: String,
    pub report: Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub name: String,
    pub config_sha256: String,
    pub runs: Vec<SweepRun>,
}

impl SweepReport {
    pub fn violations(&self) -> usize {
        self.runs.iter().map(|r| r.report.violations.len()).sum()
    }

    pub fn find(&self, label: &str) -> Option<&Report> {
        self.runs.iter().find(|r| r.label == label).map(|r| &r.report)
    }
}

/// Runs every sweep combination on the worker pool; a config without axes
/// gives a single run with an empty label.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let runs = config
        .expand()?
        .into_par_iter()
        .map(|(label, c)| {
            run_experiment(&c)
                .map(|report| SweepRun { label: label.clone(), report })
                .map_err(|e| Error::Config(format!("run `{label}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        name: config.name.clone(),
        config_sha256: config.hash(),
        runs,
    })
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const EFFICIENCY_COLUMNS: &[&str] = &[
    "k", "t", "err_sq", "maj_sq", "min_sq", "err_min_sq", "exact_sq", "err_rel", "maj_rel", "min_rel", "i_maj",
    "i_min", "i_eff", "i_eff_sq",
];

pub const TERMS_COLUMNS: &[&str] = &[
    "k",
    "t",
    "err_grad_sq",
    "err_reaction_sq",
    "err_l2_sq",
    "err_final_sq",
    "maj_initial",
    "maj_reaction",
    "maj_friedrichs",
    "maj_flux",
    "maj_boundary",
    "maj_sq",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSummary {
    pub slab: usize,
    pub strong_global: Option<f64>,
    pub spearman: Option<f64>,
    /// (θ, weak measure)
    pub weak: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub metadata: RunMetadata,
    pub final_row: Option<LevelRow>,
    pub violations: usize,
    pub exact: bool,
    pub incremental: IncrementalCheck,
    pub indicators: Vec<IndicatorSummary>,
}

impl Summary {
    pub fn of(report: &Report) -> Self {
        Self {
            name: report.config.name.clone(),
            metadata: report.metadata.clone(),
            final_row: report.final_row().cloned(),
            violations: report.violations.len(),
            exact: report.exact,
            incremental: report.incremental.clone(),
            indicators: report
                .indicators
                .iter()
                .map(|s| IndicatorSummary {
                    slab: s.slab,
                    strong_global: s.strong_global,
                    spearman: s.spearman,
                    weak: s.marks.iter().map(|m| (m.theta, m.weak)).collect(),
                })
                .collect(),
        }
    }
}

/// Writes the report tables into `dir` and returns the files written.
///
/// CSV: efficiency_by_time.csv, majorant_terms.csv, one
/// indicators_slab{k}.csv per indicator slab, summary.json.
/// JSON: report.json, summary.json.
pub fn emit_tables(report: &Report, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    match format {
        OutputFormat::Csv => {
            let eff: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        num(r.t),
                        num(r.err_sq),
                        num(r.maj_sq),
                        opt(r.min_sq),
                        opt(r.err_min_sq),
                        num(r.exact_sq),
                        opt(r.err_rel),
                        opt(r.maj_rel),
                        opt(r.min_rel),
                        opt(r.i_maj),
                        opt(r.i_min),
                        opt(r.i_eff),
                        opt(r.i_eff_sq),
                    ]
                })
                .collect();
            let path = dir.join("efficiency_by_time.csv");
            write_csv(&path, EFFICIENCY_COLUMNS, &eff)?;
            files.push(path);

            let terms: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    let m = &r.maj_terms;
                    vec![
                        r.k.to_string(),
                        num(r.t),
                        num(r.error.grad_sq),
                        num(r.error.reaction_sq),
                        num(r.error.l2_sq),
                        num(r.error.final_sq),
                        num(m.initial),
                        num(m.reaction),
                        num(m.friedrichs),
                        num(m.flux),
                        num(m.boundary),
                        num(r.maj_sq),
                    ]
                })
                .collect();
            let path = dir.join("majorant_terms.csv");
            write_csv(&path, TERMS_COLUMNS, &terms)?;
            files.push(path);

            for s in &report.indicators {
                let mut header = vec!["element".to_string(), "err".into(), "ind".into()];
                for m in &s.marks {
                    header.push(format!("mark_err_{}", m.theta));
                    header.push(format!("mark_ind_{}", m.theta));
                }
                let rows: Vec<Vec<String>> = (0..s.err.len())
                    .map(|e| {
                        let mut r = vec![e.to_string(), num(s.err[e]), num(s.ind[e])];
                        for m in &s.marks {
                            r.push(u8::from(m.from_error.marked[e]).to_string());
                            r.push(u8::from(m.from_indicator.marked[e]).to_string());
                        }
                        r
                    })
                    .collect();
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                let path = dir.join(format!("indicators_slab{}.csv", s.slab));
                write_csv(&path, &header, &rows)?;
                files.push(path);
            }
        }
        OutputFormat::Json => {
            let path = dir.join("report.json");
            fs::write(&path, report.to_json()?)?;
            files.push(path);
        }
    }
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&Summary::of(report))? + "\n")?;
    files.push(path);
    Ok(files)
}

pub const SWEEP_COLUMNS: &[&str] = &[
    "run", "label", "preset", "mesh", "slabs", "flux", "delta", "gamma", "mu", "kappa", "k", "t", "err_sq", "maj_sq",
    "min_sq", "i_maj", "i_min", "i_eff", "i_eff_sq", "violations",
];

/// Writes sweep_summary.csv (one row per run at its last level) and each
/// run's tables into run_XX subdirectories.
pub fn emit_sweep(sweep: &SweepReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let rows: Vec<Vec<String>> = sweep
        .runs
        .iter()
        .enumerate()
        .map(|(i, run)| {
            let c = &run.report.config;
            let last = run.report.final_row();
            vec![
                i.to_string(),
                run.label.clone(),
                c.preset.to_string(),
                c.mesh.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x"),
                c.slabs.to_string(),
                c.flux.to_string(),
                num(c.majorant.delta),
                num(c.majorant.gamma),
                c.majorant.mu.to_string(),
                num(c.minorant.kappa),
                last.map(|r| r.k.to_string()).unwrap_or_default(),
                opt(last.map(|r| r.t)),
                opt(last.map(|r| r.err_sq)),
                opt(last.map(|r| r.maj_sq)),
                opt(last.and_then(|r| r.min_sq)),
                opt(last.and_then(|r| r.i_maj)),
                opt(last.and_then(|r| r.i_min)),
                opt(last.and_then(|r| r.i_eff)),
                opt(last.and_then(|r| r.i_eff_sq)),
                run.report.violations.len().to_string(),
            ]
        })
        .collect();
    let path = dir.join("sweep_summary.csv");
    write_csv(&path, SWEEP_COLUMNS, &rows)?;
    files.push(path);
    for (i, run) in sweep.runs.iter().enumerate() {
        files.extend(emit_tables(&run.report, &dir.join(format!("run_{i:02}")), format)?);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_reporting_levels() {
        let mut c = ExperimentConfig::new("ex1", PresetId::Ex1, vec![39], 39);
        c.report_stride = 4;
        let levels = c.reporting_levels();
        assert_eq!(levels, vec![4, 8, 12, 16, 20, 24, 28, 32, 36, 39]);
        let t: Vec<f64> = levels.iter().map(|&k| 10.0 * k as f64 / 39.0).collect();
        assert!((t[0] - 1.03).abs() < 5e-3 && (t[1] - 2.05).abs() < 5e-3 && t[9] == 10.0);
    }

    #[test]
    fn sweep_expansion_is_cartesian() {
        let mut c = ExperimentConfig::new("s", PresetId::Ex2 { rho: 1.0 }, vec![8], 4);
        c.sweep = vec![SweepAxis::Rho(vec![0.1, 10.0]), SweepAxis::Mu(vec![MuChoice::Zero, MuChoice::One, MuChoice::Optimal])];
        let runs = c.expand().unwrap();
        assert_eq!(runs.len(), 6);
        assert_eq!(runs[4].0, "rho=10,mu=one");
        assert_eq!(runs[4].1.preset, PresetId::Ex2 { rho: 10.0 });
        assert!(runs.iter().all(|(_, c)| c.sweep.is_empty()));
        c.sweep = vec![SweepAxis::Rho(vec![1.0])];
        c.preset = PresetId::Ex1;
        assert!(c.expand().is_err());
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_json(r#"{"name":"x","preset":"ex1","mesh":[4],"slabs":2,"bogus":1}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"name":"x","preset":"ex4","mesh":[4],"slabs":2}"#).unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_json(r#"{"name":"x","preset":"ex1","mesh":[4],"slabs":2,"flux":"optimize+enrich"}"#)
            .unwrap();
        assert_eq!(c.flux, FluxMode::OptimizeEnrich);
        assert_eq!(c.majorant, MajorantConfig::default());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut c = ExperimentConfig::new("x", PresetId::Ex1, vec![4], 2);
        let o = ConfigOverrides {
            mesh: Some(vec![10]),
            mu: Some(MuChoice::Optimal),
            theta: Some(vec![0.2, 0.4]),
            ..Default::default()
        };
        o.apply(&mut c);
        assert_eq!(c.mesh, vec![10]);
        assert_eq!(c.majorant.mu, MuChoice::Optimal);
        assert_eq!(c.indicators.theta, vec![0.2, 0.4]);
        assert_eq!(c.slabs, 2);
    }
}
