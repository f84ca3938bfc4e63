//! Declarative run configuration, stored as TOML.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use yamabe_core::{CollarMethod, ProbeModel, SolveMode, Topology};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Compute,
    Verify,
    Anomaly,
    Vary,
    Probe,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Grid,
    Homogeneous,
}

impl From<Mode> for SolveMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Grid => SolveMode::Grid,
            Mode::Homogeneous => SolveMode::Homogeneous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmbientConfig {
    #[default]
    Euclidean,
    SpaceForm {
        curvature: f64,
    },
    /// `e^{2ω}δ` with `ω` an expression in `x, y[, z]`.
    ConformalFlat {
        omega: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyConfig {
    #[default]
    Periodic,
    Polar,
}

impl From<TopologyConfig> for Topology {
    fn from(t: TopologyConfig) -> Self {
        match t {
            TopologyConfig::Periodic => Topology::Periodic,
            TopologyConfig::Polar => Topology::Polar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceConfig {
    /// Round sphere of the given chart radius about the origin.
    Sphere {
        radius: f64,
    },
    /// Geodesic sphere of the given ambient radius about the chart origin.
    GeodesicSphere {
        rho: f64,
    },
    Torus {
        major: f64,
        minor: f64,
    },
    Ellipsoid {
        axes: [f64; 3],
    },
    Circle {
        radius: f64,
    },
    /// Embedding components in the parameters `u` (curves) or `u, v`.
    Parametric {
        components: Vec<String>,
        #[serde(default)]
        topology: TopologyConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nu: usize,
    pub nv: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nu: 64, nv: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollarSource {
    #[default]
    Auto,
    Numeric,
    /// Read jets from a JSON collar record.
    File,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollarConfig {
    #[serde(default)]
    pub method: CollarSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// File name in the output directory for the computed jets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub export: Option<String>,
}

impl CollarConfig {
    pub fn method(&self) -> CollarMethod {
        match self.method {
            CollarSource::Numeric => CollarMethod::Numeric,
            _ => CollarMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaCoordinates {
    /// Ambient chart coordinates `x, y[, z]`.
    #[default]
    Ambient,
    /// Surface parameters followed by the distance `r`.
    Collar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyConfig {
    pub omega: String,
    #[serde(default)]
    pub coordinates: OmegaCoordinates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaryConfig {
    /// Normal speeds as expressions in ambient coordinates.
    pub f: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub model: ProbeModel,
    #[serde(default = "default_eps_min")]
    pub eps_min: f64,
    #[serde(default = "default_eps_max")]
    pub eps_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_corrections")]
    pub corrections: usize,
}

fn default_eps_min() -> f64 {
    1e-3
}

fn default_eps_max() -> f64 {
    1e-1
}

fn default_samples() -> usize {
    16
}

fn default_corrections() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// `R/a` of a torus with the configured minor radius.
    TorusRatio,
    /// Polar radius of a geodesic sphere in the configured space form.
    GeodesicRadius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_json")]
    pub json: String,
    #[serde(default = "default_csv")]
    pub csv: String,
}

fn default_dir() -> String {
    "out".into()
}

fn default_json() -> String {
    "result.json".into()
}

fn default_csv() -> String {
    "table.csv".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            json: default_json(),
            csv: default_csv(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Multiplies every check tolerance.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Per-check tolerances keyed by check name, before scaling.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, f64>,
}

fn default_scale() -> f64 {
    1.0
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            scale: 1.0,
            overrides: BTreeMap::new(),
        }
    }
}

impl ToleranceConfig {
    pub fn get(&self, name: &str, default: f64) -> f64 {
        self.overrides.get(name).copied().unwrap_or(default) * self.scale
    }
}

fn default_n() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceConfig>,
    #[serde(default)]
    pub ambient: AmbientConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub collar: CollarConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<AnomalyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vary: Option<VaryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

impl SurfaceConfig {
    /// Rejects non-finite or non-positive sizes and self-intersecting tori.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |what: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "surface {what} must be positive and finite, got {x}"
                )))
            }
        };
        match self {
            SurfaceConfig::Sphere { radius } | SurfaceConfig::Circle { radius } => positive("radius", *radius),
            SurfaceConfig::GeodesicSphere { rho } => positive("rho", *rho),
            SurfaceConfig::Torus { major, minor } => {
                positive("major radius", *major)?;
                positive("minor radius", *minor)?;
                if major <= minor {
                    return Err(CliError::Config(format!(
                        "torus needs major > minor, got {major} and {minor}"
                    )));
                }
                Ok(())
            }
            SurfaceConfig::Ellipsoid { axes } => axes.iter().try_for_each(|&a| positive("semi-axis", a)),
            SurfaceConfig::Parametric { components, .. } => {
                if components.is_empty() {
                    return Err(CliError::Config("parametric surface needs components".into()));
                }
                Ok(())
            }
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the value ranges that the format alone cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::Config("n must be at least 1".into()));
        }
        if let Some(s) = &self.surface {
            s.validate()?;
        }
        if !(self.tolerances.scale.is_finite() && self.tolerances.scale > 0.0) {
            return Err(CliError::Config("tolerance scale must be positive".into()));
        }
        if let Some(s) = &self.sweep {
            if s.steps == 0 || !(s.start.is_finite() && s.stop.is_finite()) {
                return Err(CliError::Config(
                    "sweep needs finite bounds and at least one step".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// The block a command needs, or a configuration error naming it.
    pub fn require<'a, T>(&self, block: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        block
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("command {:?} needs a [{name}] block", self.command)))
    }
}
