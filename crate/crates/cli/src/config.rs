//! Experiment files, parameter overrides and bundled configs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Prefix of environment variables that patch parameters, e.g.
/// `SPINMEM_PARAM_REALIZATIONS=50` or `SPINMEM_PARAM_PIPELINE__SAMPLES=200`.
pub const PARAM_ENV_PREFIX: &str = "SPINMEM_PARAM_";

pub const DEFAULT_SEED: u64 = 1;

pub const BUNDLED: &[(&str, &str)] = &[
    ("j1_basins", include_str!("../configs/j1_basins.json")),
    ("sk_capacity", include_str!("../configs/sk_capacity.json")),
    ("j1_trial", include_str!("../configs/j1_trial.json")),
    ("hopfield_sweep", include_str!("../configs/hopfield_sweep.json")),
    ("sk_fraction", include_str!("../configs/sk_fraction.json")),
    ("polaronic_grid", include_str!("../configs/polaronic_grid.json")),
    ("j1", include_str!("../configs/j1.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
}

/// On-disk experiment file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub deterministic: Option<bool>,
    #[serde(default)]
    pub params: Value,
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub command: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub deterministic: bool,
    pub emit_trajectory: bool,
    pub out: PathBuf,
    /// Directory relative paths in the parameters resolve against.
    pub base_dir: PathBuf,
    pub params: Value,
    pub started: Instant,
}

/// Provenance embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub deterministic: bool,
    /// Resolved parameters, defaults filled in.
    pub params: Value,
}

impl Experiment {
    pub fn parse_params<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        let v = if self.params.is_null() { Value::Object(Map::new()) } else { self.params.clone() };
        serde_json::from_value(v).map_err(|e| CliError::Config(format!("invalid {} parameters: {e}", self.command)))
    }

    /// Hashes the command, seed and resolved parameters.
    pub fn meta<T: Serialize>(&self, resolved: &T) -> Meta {
        let params = serde_json::to_value(resolved).expect("parameters serialize");
        let canonical = serde_json::to_string(&serde_json::json!({
            "command": self.command,
            "seed": self.seed,
            "params": params,
        }))
        .expect("json");
        let digest = Sha256::digest(canonical.as_bytes());
        Meta {
            version: VERSION.to_string(),
            command: self.command.clone(),
            config_hash: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed: self.seed,
            deterministic: self.deterministic,
            params,
        }
    }

    /// Wall time so far, omitted in deterministic mode.
    pub fn elapsed_s(&self) -> Option<f64> {
        (!self.deterministic).then(|| self.started.elapsed().as_secs_f64())
    }

    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

pub fn load_file(path: &Path) -> Result<ExperimentFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_file(&text, &path.display().to_string())
}

pub fn parse_file(text: &str, origin: &str) -> Result<ExperimentFile, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config {origin}: {e}")))
}

/// Parses a `--set` value: JSON if it parses, a plain string otherwise.
fn literal(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

/// Sets `path` (dot separated) inside `root`, creating objects on the way.
pub fn set_path(root: &mut Value, path: &[&str], value: Value) -> Result<(), CliError> {
    if root.is_null() {
        *root = Value::Object(Map::new());
    }
    let Some((last, head)) = path.split_last() else {
        return Err(CliError::Config("empty parameter path".into()));
    };
    let mut cur = root;
    for key in head {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("cannot set {}: {key} is not an object", path.join("."))))?;
        cur = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
        if cur.is_null() {
            *cur = Value::Object(Map::new());
        }
    }
    cur.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("cannot set {}: parent is not an object", path.join("."))))?
        .insert(last.to_string(), value);
    Ok(())
}

/// Applies one `key.sub=value` override.
pub fn apply_set(params: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (k, v) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = k.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {k:?}")));
    }
    set_path(params, &path, literal(v.trim()))
}

/// Applies `SPINMEM_PARAM_*` variables; `__` separates nesting levels.
pub fn apply_env(params: &mut Value, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), CliError> {
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(PARAM_ENV_PREFIX))
        .collect();
    vars.sort();
    for (k, v) in vars {
        let key = k[PARAM_ENV_PREFIX.len()..].to_ascii_lowercase();
        let path: Vec<&str> = key.split("__").collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(CliError::Config(format!("bad override variable {k}")));
        }
        set_path(params, &path, literal(&v))?;
    }
    Ok(())
}

/// Overlays `patch` onto `base`, rejecting keys `base` does not have.
pub fn merge_known(base: &mut Value, patch: &Value, what: &str) -> Result<(), CliError> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let slot = b
                    .get_mut(k)
                    .ok_or_else(|| CliError::Config(format!("unknown {what} field {k:?}")))?;
                let tagged = v.get("mode").or_else(|| v.get("type")).is_some();
                if slot.is_object() && v.is_object() && !tagged {
                    merge_known(slot, v, what)?;
                } else {
                    *slot = v.clone();
                }
            }
            Ok(())
        }
        (b, p) => {
            *b = p.clone();
            Ok(())
        }
    }
}
