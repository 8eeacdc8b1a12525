//! JSON job configurations. Every struct rejects unknown keys, and every
//! length carries an explicit unit.

use std::path::Path;

use anyhow::Context;
use linekit::eigenmetrics::Scaling;
use linekit::medium::{DispersionModel, Permittivity};
use linekit::optimizer::{EqualityRow, LossKind, LossSpec, OptimizerConfig};
use linekit::rulers::RulerFamily;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// A malformed or invalid configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn load<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).map_err(anyhow::Error::new)
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            ConfigError(format!("config: {inner}"))
        } else {
            ConfigError(format!("config field `{path}`: {inner}"))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthUnit {
    #[serde(rename = "m")]
    Meter,
    #[serde(rename = "cm")]
    Centimeter,
    #[serde(rename = "mm")]
    Millimeter,
    #[serde(rename = "um", alias = "µm")]
    Micrometer,
}

impl LengthUnit {
    pub fn in_meters(self) -> f64 {
        match self {
            LengthUnit::Meter => 1.0,
            LengthUnit::Centimeter => 1e-2,
            LengthUnit::Millimeter => 1e-3,
            LengthUnit::Micrometer => 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Length {
    pub value: f64,
    pub unit: LengthUnit,
}

impl Length {
    pub fn meters(&self) -> f64 {
        self.value * self.unit.in_meters()
    }

    pub fn zero() -> Self {
        Length { value: 0.0, unit: LengthUnit::Meter }
    }
}

/// Several lengths sharing one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lengths {
    pub value: Vec<f64>,
    pub unit: LengthUnit,
}

impl Lengths {
    pub fn meters(&self) -> Vec<f64> {
        self.value.iter().map(|v| v * self.unit.in_meters()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub frequency_hz: f64,
    pub eps_real: f64,
    #[serde(default)]
    pub eps_imag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Medium {
    /// ε = ε′ − jε″, frequency independent.
    Constant {
        eps_real: f64,
        #[serde(default)]
        eps_imag: f64,
    },
    Tabulated { points: Vec<TableRow> },
    /// Rectangular waveguide in TE10.
    Waveguide {
        width: Length,
        #[serde(default = "one")]
        eps_r: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Medium {
    pub fn model(&self) -> linekit::Result<DispersionModel> {
        match self {
            Medium::Constant { eps_real, eps_imag } => DispersionModel::constant(*eps_real, *eps_imag),
            Medium::Tabulated { points } => DispersionModel::tabulated(
                points
                    .iter()
                    .map(|r| Ok((r.frequency_hz, Permittivity::new(r.eps_real, r.eps_imag)?)))
                    .collect::<linekit::Result<_>>()?,
            ),
            Medium::Waveguide { width, eps_r } => DispersionModel::waveguide(width.meters(), *eps_r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyRange {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    501
}

fn default_margin() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub medium: Medium,
    pub lengths: Lengths,
    pub frequency: FrequencyRange,
    #[serde(default = "default_margin")]
    pub margin_deg: f64,
    #[serde(default)]
    pub scaling: Scaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualityConfig {
    pub coefficients: Vec<f64>,
    pub rhs: Length,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(default)]
    pub kind: LossKind,
    #[serde(default = "Length::zero")]
    pub length_sigma: Length,
    /// Full length covariance in m², overriding `length_sigma`.
    #[serde(default)]
    pub length_cov_m2: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_equality_weight")]
    pub equality_penalty_weight: f64,
}

fn default_equality_weight() -> f64 {
    LossSpec::default().equality_penalty_weight
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            kind: LossKind::default(),
            length_sigma: Length::zero(),
            length_cov_m2: None,
            equality_penalty_weight: default_equality_weight(),
        }
    }
}

impl LossConfig {
    pub fn spec(&self) -> LossSpec {
        LossSpec {
            kind: self.kind,
            length_sigma: self.length_sigma.meters(),
            length_cov: self.length_cov_m2.clone(),
            equality_penalty_weight: self.equality_penalty_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignOptimizeConfig {
    pub medium: Medium,
    pub band: Band,
    #[serde(default = "default_margin")]
    pub margin_deg: f64,
    /// Longest line; derived from the lower band edge when absent.
    #[serde(default)]
    pub l_max: Option<Length>,
    #[serde(default)]
    pub n_lines: Option<usize>,
    #[serde(default = "Length::zero")]
    pub l_min_gap: Length,
    #[serde(default)]
    pub extra_equalities: Vec<EqualityConfig>,
    #[serde(default)]
    pub quantization_step: Option<Length>,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl DesignOptimizeConfig {
    pub fn equalities(&self) -> Vec<EqualityRow> {
        self.extra_equalities
            .iter()
            .map(|e| EqualityRow { coefficients: e.coefficients.clone(), rhs: e.rhs.meters() })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRulerConfig {
    pub medium: Medium,
    pub band: Band,
    #[serde(default = "default_margin")]
    pub margin_deg: f64,
    #[serde(default)]
    pub band_n: u32,
    #[serde(default)]
    pub n_lines: Option<usize>,
    #[serde(default)]
    pub family: RulerFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinecountConfig {
    pub medium: Medium,
    pub band: Band,
    pub l_max: Length,
    #[serde(default = "default_margin")]
    pub margin_deg: f64,
    /// Used only for lossy media, where lines are added until the margin is met.
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrlBandConfig {
    pub medium: Medium,
    pub band: Band,
    #[serde(default = "default_margin")]
    pub margin_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Standard deviation per complex T-matrix entry.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default = "default_length_sigma")]
    pub length_sigma: Length,
    /// Standard deviations of ε′ and ε″, one draw per trial shared by all lines.
    #[serde(default)]
    pub eps_sigma: [f64; 2],
    #[serde(default)]
    pub seed: u64,
}

fn default_trials() -> usize {
    500
}

fn default_noise() -> f64 {
    0.1
}

fn default_length_sigma() -> Length {
    Length { value: 20.0, unit: LengthUnit::Micrometer }
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            trials: default_trials(),
            noise_sigma: default_noise(),
            length_sigma: default_length_sigma(),
            eps_sigma: [0.0, 0.0],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSensConfig {
    pub medium: Medium,
    pub lengths: Lengths,
    pub frequency: FrequencyRange,
    #[serde(default)]
    pub mc: McSection,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_convert_to_meters() {
        let l: Length = parse(r#"{"value": 5.05, "unit": "mm"}"#).unwrap();
        assert!((l.meters() - 5.05e-3).abs() < 1e-18);
        let l: Length = parse(r#"{"value": 20, "unit": "µm"}"#).unwrap();
        assert!((l.meters() - 20e-6).abs() < 1e-20);
        let ls: Lengths = parse(r#"{"value": [0, 1, 4, 6], "unit": "cm"}"#).unwrap();
        assert_eq!(ls.meters(), vec![0.0, 0.01, 0.04, 0.06]);
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse::<AnalyzeConfig>(
            r#"{"medium": {"kind": "constant", "eps_real": 2.6}, "lengths": {"value": [0, 1], "unit": "inch"},
                "frequency": {"f_min_hz": 1e9, "f_max_hz": 2e9}}"#,
        )
        .unwrap_err();
        assert!(e.0.contains("lengths.unit"), "{e}");
        let e = parse::<TrlBandConfig>(
            r#"{"medium": {"kind": "constant", "eps_real": 2.6, "bogus": 1}, "band": {"f_min_hz": 1e9, "f_max_hz": 8e9}}"#,
        )
        .unwrap_err();
        assert!(e.0.contains("bogus"), "{e}");
        let e = parse::<TrlBandConfig>(
            r#"{"medium": {"kind": "constant", "eps_real": 2.6}, "band": {"f_min_hz": 1e9, "f_max_hz": 8e9}, "extra": 0}"#,
        )
        .unwrap_err();
        assert!(e.0.contains("extra"), "{e}");
    }

    #[test]
    fn defaults_are_filled() {
        let c: DesignOptimizeConfig = parse(
            r#"{"medium": {"kind": "waveguide", "width": {"value": 864, "unit": "um"}},
                "band": {"f_min_hz": 220e9, "f_max_hz": 300e9}}"#,
        )
        .unwrap();
        assert_eq!(c.margin_deg, 30.0);
        assert_eq!(c.optimizer, OptimizerConfig::default());
        assert!(matches!(c.medium, Medium::Waveguide { eps_r, .. } if eps_r == 1.0));
    }
}
