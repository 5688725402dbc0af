//! JSON run configuration: explicit schema, every field required, unknown
//! fields rejected; the parsed value is echoed verbatim into the manifest.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::path::Path;
use yamabe_core::constants::Constants;
use yamabe_core::flow::{FlowConfig, OuterBc, TimeNormalization};
use yamabe_core::grid::RadialGrid;
use yamabe_core::initial::{build_bump, build_schwarzschild, load_profile, ConformalData};
use yamabe_core::norms::{Variant, WeightSpec};

use crate::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h0: f64,
    pub stretch: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDataConfig {
    Schwarzschild { mass: f64 },
    Bump { amplitude: f64, r_center: f64, width: f64, tail: f64 },
    Profile { path: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterBcConfig {
    RobinDecay,
    DirichletOne,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockConfig {
    UTime,
    Geometric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub t_end: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: u32,
    pub outer_bc: OuterBcConfig,
    pub diagnostics_stride: usize,
    pub time_normalization: ClockConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: u32,
    pub grid: GridConfig,
    pub initial_data: InitialDataConfig,
    pub flow: FlowSection,
    /// Constant of the curvature-gradient monitor (recorded, not asserted).
    pub cprime: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn constants(&self) -> Result<Constants, Failure> {
        Constants::new(self.dimension).map_err(|e| Failure::Usage(format!("dimension: {e}")))
    }

    pub fn build_grid(&self) -> Result<RadialGrid, Failure> {
        RadialGrid::geometric(self.grid.h0, self.grid.stretch, self.grid.r_max)
            .map_err(|e| Failure::Usage(format!("grid: {e}")))
    }

    pub fn build_data(&self, grid: &RadialGrid, c: &Constants) -> Result<ConformalData, Failure> {
        match &self.initial_data {
            InitialDataConfig::Schwarzschild { mass } => build_schwarzschild(grid, c, *mass),
            InitialDataConfig::Bump { amplitude, r_center, width, tail } => {
                build_bump(grid, c, *amplitude, *r_center, *width, *tail)
            }
            InitialDataConfig::Profile { path } => load_profile(Path::new(path), grid, c),
        }
        .map_err(|e| Failure::Usage(format!("initial_data: {e}")))
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            t_end: self.flow.t_end,
            dt_init: self.flow.dt_init,
            dt_min: self.flow.dt_min,
            dt_max: self.flow.dt_max,
            newton_tol: self.flow.newton_tol,
            newton_max_iter: self.flow.newton_max_iter,
            outer_bc: match self.flow.outer_bc {
                OuterBcConfig::RobinDecay => OuterBc::RobinDecay,
                OuterBcConfig::DirichletOne => OuterBc::DirichletOne,
            },
            diagnostics_stride: self.flow.diagnostics_stride,
            time_normalization: match self.flow.time_normalization {
                ClockConfig::UTime => TimeNormalization::UTime,
                ClockConfig::Geometric => TimeNormalization::Geometric,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantConfig {
    Elliptic,
    Parabolic,
    ParabolicTilde,
}

/// Integrability exponent that also admits the JSON string "inf".
fn de_exponent<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Number(v) => Ok(v),
        Raw::Text(s) if s == "inf" => Ok(f64::INFINITY),
        Raw::Text(s) => Err(serde::de::Error::custom(format!(
            "q must be a number or \"inf\", got \"{s}\""
        ))),
    }
}

fn ser_exponent<S: Serializer>(q: &f64, s: S) -> Result<S::Ok, S::Error> {
    if q.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*q)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpecConfig {
    pub variant: VariantConfig,
    pub beta: f64,
    #[serde(deserialize_with = "de_exponent", serialize_with = "ser_exponent")]
    pub q: f64,
    pub k: usize,
    pub alpha: f64,
}

impl NormSpecConfig {
    pub fn weight_spec(&self) -> WeightSpec {
        WeightSpec {
            beta: self.beta,
            q: self.q,
            k: self.k,
            alpha: self.alpha,
            variant: match self.variant {
                VariantConfig::Elliptic => Variant::Elliptic,
                VariantConfig::Parabolic => Variant::ParabolicPlain,
                VariantConfig::ParabolicTilde => Variant::ParabolicTilde,
            },
        }
    }

    pub fn variant_label(&self) -> &'static str {
        match self.variant {
            VariantConfig::Elliptic => "elliptic",
            VariantConfig::Parabolic => "parabolic",
            VariantConfig::ParabolicTilde => "parabolic_tilde",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    pub specs: Vec<NormSpecConfig>,
}

impl NormsConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read norm specs {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("norm specs {}: {e}", path.display())))
    }
}
