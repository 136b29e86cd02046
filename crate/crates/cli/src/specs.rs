//! Parameter blocks shared between subcommands.

use serde::{de::DeserializeOwned, Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};
use spinmem::cavity::{Point, SitePlan};
use spinmem::semiclassical::{Elasticity, NoiseModel, SimParams};
use spinmem::DynamicsKind;

use crate::config::{bundled, merge_known, Experiment};
use crate::CliError;

/// Dynamics written as `MH`, `SD`, `SD_RATE` or `SD/lowest-index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Kind(pub DynamicsKind);

impl TryFrom<String> for Kind {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse().map(Kind).map_err(|e: spinmem::Error| e.to_string())
    }
}

impl From<Kind> for String {
    fn from(k: Kind) -> String {
        k.0.to_string()
    }
}

/// Deserializes a partial object over `T::default()`.
pub fn over_default<'de, D, T>(d: D) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: Default + Serialize + DeserializeOwned,
{
    let patch = Value::deserialize(d)?;
    overlay(T::default(), &patch, std::any::type_name::<T>()).map_err(serde::de::Error::custom)
}

pub fn overlay<T: Serialize + DeserializeOwned>(base: T, patch: &Value, what: &str) -> Result<T, CliError> {
    let mut v = serde_json::to_value(base)?;
    let what = what.rsplit("::").next().unwrap_or(what);
    merge_known(&mut v, patch, what)?;
    serde_json::from_value(v).map_err(|e| CliError::Config(format!("invalid {what}: {e}")))
}

/// `"j1"`, a path to a JSON list of points, or the list itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanSpec {
    Named(String),
    Sites(Vec<Point>),
}

impl Default for PlanSpec {
    fn default() -> Self {
        PlanSpec::Named("j1".into())
    }
}

impl PlanSpec {
    pub fn resolve(&self, exp: &Experiment) -> Result<SitePlan, CliError> {
        match self {
            PlanSpec::Sites(s) => Ok(SitePlan::new(s.clone())?),
            PlanSpec::Named(name) => {
                if let Some(text) = bundled(name).filter(|_| !name.contains('/')) {
                    return SitePlan::from_json(text).map_err(|e| CliError::Config(format!("bundled plan {name}: {e}")));
                }
                let path = exp.resolve_path(name);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("cannot read plan {}: {e}", path.display())))?;
                SitePlan::from_json(&text).map_err(|e| CliError::Config(format!("malformed plan {}: {e}", path.display())))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Tight tolerances, exact geometry.
    #[default]
    Exact,
    /// Looser tolerances, lazy geometry.
    Fast,
}

/// Simulation settings: a preset, a trap-energy factor and any `SimParams`
/// fields to override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(default)]
    pub preset: Preset,
    /// Multiplies the preset's trap energy.
    #[serde(default = "one")]
    pub e_trap_factor: f64,
    #[serde(flatten)]
    pub overrides: Map<String, Value>,
}

fn one() -> f64 {
    1.0
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            preset: Preset::Exact,
            e_trap_factor: 1.0,
            overrides: Map::new(),
        }
    }
}

impl SimSpec {
    pub fn fast() -> Self {
        Self {
            preset: Preset::Fast,
            ..Self::default()
        }
    }

    pub fn resolve(&self) -> Result<SimParams, CliError> {
        let base = match self.preset {
            Preset::Exact => SimParams::default(),
            Preset::Fast => SimParams::fast(),
        };
        let mut p: SimParams = overlay(base, &Value::Object(self.overrides.clone()), "SimParams")?;
        if !(self.e_trap_factor > 0.0 && self.e_trap_factor.is_finite()) {
            return Err(CliError::Config(format!("e_trap_factor must be positive, got {}", self.e_trap_factor)));
        }
        p.elasticity = p.elasticity.scaled(self.e_trap_factor);
        p.validate()?;
        Ok(p)
    }
}

/// `"none"`, `"both"`, `"trap"`, `"stimulus"`, or a full noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Preset(String),
    Custom(NoiseModel),
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Preset("both".into())
    }
}

impl NoiseSpec {
    pub fn resolve(&self) -> Result<NoiseModel, CliError> {
        let m = match self {
            NoiseSpec::Custom(m) => *m,
            NoiseSpec::Preset(s) => match s.as_str() {
                "none" => NoiseModel::none(),
                "both" => NoiseModel::both(),
                "trap" => NoiseModel::trap_only(),
                "stimulus" => NoiseModel::stimulus_only(),
                other => {
                    return Err(CliError::Config(format!(
                        "unknown noise preset {other:?} (none, both, trap, stimulus)"
                    )))
                }
            },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn label(&self) -> String {
        match self {
            NoiseSpec::Preset(s) => s.clone(),
            NoiseSpec::Custom(_) => "custom".into(),
        }
    }
}

/// Elasticity level for grids: a trap-energy factor or no elasticity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticityLevel {
    pub label: String,
    /// `None` pins the sites.
    pub e_trap_factor: Option<f64>,
}

impl ElasticityLevel {
    pub fn apply(&self, mut p: SimParams) -> Result<SimParams, CliError> {
        p.elasticity = match self.e_trap_factor {
            None => Elasticity::Disabled,
            Some(f) if f > 0.0 && f.is_finite() => {
                let base = p.elasticity.e_trap().unwrap_or(spinmem::semiclassical::DEFAULT_E_TRAP);
                Elasticity::Trap { e_trap: base * f }
            }
            Some(f) => return Err(CliError::Config(format!("e_trap_factor must be positive, got {f}"))),
        };
        Ok(p)
    }
}
