//! Run configuration: a strict JSON schema plus the resolved objects a
//! command needs (model, packet, grids).

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use qcarpet::spectra::turning_points;
use qcarpet::{make_coefficients, CoefficientKind, CoefficientSet, ExportFormat, SpectrumModel};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub bundles: BundleConfig,
    #[serde(default)]
    pub revival: RevivalConfig,
    #[serde(default)]
    pub trajectories: TrajectoryConfig,
    #[serde(default)]
    pub classicized: ClassicizedConfig,
    #[serde(default)]
    pub timescales: TimeScaleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    InfiniteWell(WellParams),
    Harmonic(HarmonicParams),
    Morse(ShapeParams),
    RosenMorseI(ShapeParams),
    Polynomial(PolynomialParams),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellParams {
    pub width: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicParams {
    pub omega: f64,
    pub max_level: Option<u32>,
}

/// Morse and Rosen-Morse I parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub max_level: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialParams {
    #[serde(default)]
    pub positive: Vec<f64>,
    #[serde(default)]
    pub negative: Vec<f64>,
    pub max_level: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientConfig {
    Gaussian(GaussianParams),
    Uniform(UniformParams),
    PerfectSquares(SquaresParams),
    Custom(CustomParams),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianParams {
    pub center: f64,
    pub sigma: f64,
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformParams {
    pub lo: u32,
    pub hi: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquaresParams {
    pub max: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomParams {
    pub entries: Vec<CustomEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomEntry {
    pub n: u32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub nx: Option<usize>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub nt: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    /// Multiples of `v_0` in the square well, absolute speeds otherwise.
    /// Empty selects every bundle.
    #[serde(default)]
    pub speeds: Vec<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevivalConfig {
    #[serde(default = "default_fractions")]
    pub fractions: Vec<[u32; 2]>,
}

impl Default for RevivalConfig {
    fn default() -> Self {
        RevivalConfig { fractions: default_fractions() }
    }
}

fn default_fractions() -> Vec<[u32; 2]> {
    vec![[1, 2], [1, 3], [1, 4], [2, 5]]
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// Empty picks one slow and one fast term next to the packet center.
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub n: u32,
    pub m: u32,
    pub sign1: String,
    pub sign2: String,
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicizedConfig {
    /// Ridge prominence as a fraction of the grid maximum.
    #[serde(default = "default_prominence")]
    pub prominence: f64,
    /// Overlay tolerance as a fraction of the x-window.
    #[serde(default = "default_tolerance_fraction")]
    pub tolerance_fraction: f64,
    /// Start of the classical path; the left turning point by default.
    pub x0: Option<f64>,
    #[serde(default = "default_direction")]
    pub direction: f64,
}

impl Default for ClassicizedConfig {
    fn default() -> Self {
        ClassicizedConfig {
            prominence: default_prominence(),
            tolerance_fraction: default_tolerance_fraction(),
            x0: None,
            direction: default_direction(),
        }
    }
}

fn default_prominence() -> f64 {
    0.1
}

fn default_tolerance_fraction() -> f64 {
    0.05
}

fn default_direction() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeScaleConfig {
    /// Expansion point; the packet's rounded center by default.
    pub center: Option<f64>,
    #[serde(default = "default_max_order")]
    pub max_order: u32,
    #[serde(default = "default_min_ratio")]
    pub min_ratio: f64,
    pub degree: Option<u32>,
}

impl Default for TimeScaleConfig {
    fn default() -> Self {
        TimeScaleConfig { center: None, max_order: default_max_order(), min_ratio: default_min_ratio(), degree: None }
    }
}

fn default_max_order() -> u32 {
    4
}

fn default_min_ratio() -> f64 {
    qcarpet::revival::DEFAULT_HIERARCHY_RATIO
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Pgm,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::Pgm => ExportFormat::Pgm,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: default_directory(), formats: default_formats() }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Pgm]
}

pub const DEFAULT_POINTS: usize = 256;

/// Reads and parses a config file; parse errors name the offending key.
pub fn load(path: &Path) -> CliResult<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    parse(&text)
}

pub fn parse(text: &str) -> CliResult<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let key = e.path().to_string();
        let fallback = || CliError::config(key.clone(), e.inner().to_string());
        match key.as_str() {
            "." => CliError::config("(root)", e.inner().to_string()),
            "model" | "coefficients" => locate(text, &key).unwrap_or_else(fallback),
            _ => fallback(),
        }
    })
}

/// Tagged sections are buffered before their fields are read, which hides
/// the failing field. Re-reads the section's parameters on their own to
/// recover the full key.
fn locate(text: &str, section: &str) -> Option<CliError> {
    let root: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut params = root.get(section)?.as_object()?.clone();
    let kind = params.remove("kind")?;
    let kind = kind.as_str()?;
    let params = serde_json::Value::Object(params);
    fn attempt<T: serde::de::DeserializeOwned>(section: &str, params: serde_json::Value) -> Option<CliError> {
        let e = serde_path_to_error::deserialize::<_, T>(params).err()?;
        let inner = e.path().to_string();
        let key = if inner == "." { section.to_string() } else { format!("{section}.{inner}") };
        Some(CliError::config(key, e.into_inner().to_string()))
    }
    match (section, kind) {
        ("model", "infinite_well") => attempt::<WellParams>(section, params),
        ("model", "harmonic") => attempt::<HarmonicParams>(section, params),
        ("model", "morse" | "rosen_morse_i") => attempt::<ShapeParams>(section, params),
        ("model", "polynomial") => attempt::<PolynomialParams>(section, params),
        ("coefficients", "gaussian") => attempt::<GaussianParams>(section, params),
        ("coefficients", "uniform") => attempt::<UniformParams>(section, params),
        ("coefficients", "perfect_squares") => attempt::<SquaresParams>(section, params),
        ("coefficients", "custom") => attempt::<CustomParams>(section, params),
        _ => None,
    }
}

fn finite(key: &str, value: f64) -> CliResult<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::config(key, format!("must be finite, got {value}")))
    }
}

impl RunConfig {
    pub fn build_model(&self) -> CliResult<SpectrumModel> {
        let (model, max_level) = match &self.model {
            ModelConfig::InfiniteWell(p) => (SpectrumModel::infinite_well(p.width), None),
            ModelConfig::Harmonic(p) => (SpectrumModel::harmonic(p.omega), p.max_level),
            ModelConfig::Morse(p) => (SpectrumModel::morse(p.a, p.b, p.alpha), p.max_level),
            ModelConfig::RosenMorseI(p) => (SpectrumModel::rosen_morse_i(p.a, p.b, p.alpha), p.max_level),
            ModelConfig::Polynomial(p) => {
                (SpectrumModel::polynomial(p.positive.clone(), p.negative.clone()), p.max_level)
            }
        };
        let model = model.map_err(CliError::at("model"))?;
        match max_level {
            Some(level) => model.with_max_level(level).map_err(CliError::at("model.max_level")),
            None => Ok(model),
        }
    }

    pub fn build_coefficients(&self, model: &SpectrumModel) -> CliResult<CoefficientSet> {
        let kind = match &self.coefficients {
            CoefficientConfig::Gaussian(GaussianParams { center, sigma, cutoff }) => {
                finite("coefficients.center", *center)?;
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(CliError::config("coefficients.sigma", format!("must be positive, got {sigma}")));
                }
                match cutoff {
                    Some(c) if !(*c > 0.0 && *c < 1.0) => {
                        return Err(CliError::config("coefficients.cutoff", format!("must lie in (0, 1), got {c}")))
                    }
                    Some(c) => CoefficientKind::Gaussian { center: *center, sigma: *sigma, cutoff: *c },
                    None => CoefficientKind::gaussian(*center, *sigma),
                }
            }
            CoefficientConfig::Uniform(p) => CoefficientKind::Uniform { lo: p.lo, hi: p.hi },
            CoefficientConfig::PerfectSquares(p) => CoefficientKind::PerfectSquares { max: p.max },
            CoefficientConfig::Custom(CustomParams { entries }) => {
                for (i, e) in entries.iter().enumerate() {
                    finite(&format!("coefficients.entries[{i}].re"), e.re)?;
                    finite(&format!("coefficients.entries[{i}].im"), e.im)?;
                }
                CoefficientKind::Custom(entries.iter().map(|e| (e.n, Complex64::new(e.re, e.im))).collect())
            }
        };
        make_coefficients(&kind, model).map_err(CliError::at("coefficients"))
    }

    pub fn formats(&self) -> CliResult<Vec<Format>> {
        if self.output.formats.is_empty() {
            return Err(CliError::config("output.formats", "at least one format is required"));
        }
        let mut formats = self.output.formats.clone();
        formats.dedup();
        Ok(formats)
    }
}

/// The `x` and `t` axes of a command, after defaults and validation.
#[derive(Debug, Clone)]
pub struct Axes {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
}

fn points(key: &str, value: Option<usize>) -> CliResult<usize> {
    let n = value.unwrap_or(DEFAULT_POINTS);
    if n < 2 {
        return Err(CliError::config(key, format!("must be at least 2, got {n}")));
    }
    if n > 1 << 16 {
        return Err(CliError::config(key, format!("must be at most 65536, got {n}")));
    }
    Ok(n)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    out[n - 1] = hi;
    out
}

/// Default `x` window: the whole square well, or the classically allowed
/// region at the packet's central energy widened by a quarter of its width
/// on each side.
pub fn default_window(model: &SpectrumModel, coeffs: &CoefficientSet) -> CliResult<(f64, f64)> {
    if model.is_infinite_well() {
        return Ok(model.domain());
    }
    if !model.has_potential() {
        return Err(CliError::config("model", "a spectrum-only model has no spatial grid"));
    }
    let e = model.energy(coeffs.rounded_center()).map_err(CliError::at("coefficients"))?;
    let (left, right) = turning_points(model, e).map_err(CliError::at("coefficients"))?;
    let pad = 0.25 * (right - left);
    let (lo, hi) = model.domain();
    Ok(((left - pad).max(lo), (right + pad).min(hi)))
}

impl GridConfig {
    /// Resolves the axes, falling back to `default_x` and `default_t`.
    pub fn resolve(&self, model: &SpectrumModel, default_x: (f64, f64), default_t: (f64, f64)) -> CliResult<Axes> {
        let nx = points("grid.nx", self.nx)?;
        let nt = points("grid.nt", self.nt)?;
        let x_min = finite("grid.x_min", self.x_min.unwrap_or(default_x.0))?;
        let x_max = finite("grid.x_max", self.x_max.unwrap_or(default_x.1))?;
        let t_min = finite("grid.t_min", self.t_min.unwrap_or(default_t.0))?;
        let t_max = finite("grid.t_max", self.t_max.unwrap_or(default_t.1))?;
        if !(x_max > x_min) {
            return Err(CliError::config("grid.x_max", format!("must exceed grid.x_min ({x_max} <= {x_min})")));
        }
        if !(t_max > t_min) {
            return Err(CliError::config("grid.t_max", format!("must exceed grid.t_min ({t_max} <= {t_min})")));
        }
        let (lo, hi) = model.domain();
        if x_min < lo {
            return Err(CliError::config("grid.x_min", format!("{x_min} lies outside the model domain [{lo}, {hi}]")));
        }
        if x_max > hi {
            return Err(CliError::config("grid.x_max", format!("{x_max} lies outside the model domain [{lo}, {hi}]")));
        }
        Ok(Axes { xs: linspace(x_min, x_max, nx), ts: linspace(t_min, t_max, nt) })
    }
}
