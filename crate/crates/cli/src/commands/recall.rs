use serde::{Deserialize, Serialize};
use spinmem::cavity::CavityParams;
use spinmem::semiclassical::{run_recall_trial, trajectory_csv, EnergyTerms, Network, TrialOptions};
use spinmem::spin::{apply_errors, apply_errors_at};
use spinmem::{RandomSource, SpinConfig};

use crate::config::Experiment;
use crate::output::Artifacts;
use crate::specs::{over_default, NoiseSpec, PlanSpec, SimSpec};
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecallParams {
    pub plan: PlanSpec,
    #[serde(deserialize_with = "over_default")]
    pub cavity: CavityParams,
    pub sim: SimSpec,
    /// Stored pattern as comma-separated signs; all up when absent.
    pub memory: Option<String>,
    /// 0-based sites flipped to form the stimulus.
    pub error_sites: Option<Vec<usize>>,
    /// Number of random sites flipped when `error_sites` is absent.
    pub error_count: usize,
    pub noise: NoiseSpec,
    /// Trajectory sampling interval (ms) with `--emit-trajectory`.
    pub trajectory_dt: f64,
}

impl Default for RecallParams {
    fn default() -> Self {
        Self {
            plan: PlanSpec::default(),
            cavity: CavityParams::default(),
            sim: SimSpec::default(),
            memory: None,
            error_sites: None,
            error_count: 0,
            noise: NoiseSpec::Preset("none".into()),
            trajectory_dt: 0.05,
        }
    }
}

#[derive(Debug, Serialize)]
struct Outcome {
    n: usize,
    memory: String,
    stimulus: String,
    error_sites: Vec<usize>,
    recalled: String,
    /// Sites where the outcome differs from the stimulus.
    flipped: Vec<usize>,
    /// Hamming distance to the memory, up to a global flip.
    distance_to_memory: usize,
    recovered: bool,
    /// Final energies per `omega_z * S`.
    energy: EnergyTerms,
    energy_total: f64,
    max_spin_length_error: f64,
    mean_deviation_um: f64,
    steps_accepted: usize,
    steps_rejected: usize,
    rhs_evaluations: usize,
    geometry_refreshes: usize,
    g_c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_s: Option<f64>,
}

pub fn run(exp: &Experiment) -> Result<Artifacts, CliError> {
    let p: RecallParams = exp.parse_params()?;
    let plan = p.plan.resolve(exp)?;
    let n = plan.len();
    let sim = p.sim.resolve()?;
    let noise = p.noise.resolve()?;
    if exp.emit_trajectory && !(p.trajectory_dt > 0.0 && p.trajectory_dt.is_finite()) {
        return Err(CliError::Config(format!("trajectory_dt must be positive, got {}", p.trajectory_dt)));
    }
    let memory: SpinConfig = match &p.memory {
        Some(s) => s.parse()?,
        None => SpinConfig::all_up(n),
    };
    if memory.len() != n || !memory.is_binary() {
        return Err(CliError::Config(format!("memory must be {n} signs of +-1")));
    }
    let rng = RandomSource::new(exp.seed);
    let (stimulus, error_sites) = match &p.error_sites {
        Some(sites) => {
            if let Some(&bad) = sites.iter().find(|&&i| i >= n) {
                return Err(CliError::Config(format!("error site {bad} out of range for n = {n}")));
            }
            (apply_errors_at(&memory, sites)?, sites.clone())
        }
        None => {
            if p.error_count > n {
                return Err(CliError::Config(format!("error_count {} exceeds n = {n}", p.error_count)));
            }
            let s = apply_errors(&memory, p.error_count, &mut rng.split(0))?;
            let sites = (0..n).filter(|&i| s.values()[i] != memory.values()[i]).collect();
            (s, sites)
        }
    };
    let network = Network::new(plan, p.cavity, sim)?;
    let options = TrialOptions {
        trajectory_dt: exp.emit_trajectory.then_some(p.trajectory_dt),
    };
    let o = run_recall_trial(&network, &stimulus, &noise, &mut rng.split(1), options)?;
    let flipped = (0..n).filter(|&i| o.signs.values()[i] != stimulus.values()[i]).collect();
    let d = o.signs.hamming(&memory)?;
    let distance_to_memory = d.min(n - d);
    let outcome = Outcome {
        n,
        memory: memory.to_string(),
        stimulus: stimulus.to_string(),
        error_sites,
        recalled: o.signs.to_string(),
        flipped,
        distance_to_memory,
        recovered: distance_to_memory == 0,
        energy: o.energy,
        energy_total: o.energy.total(),
        max_spin_length_error: o.max_spin_length_error,
        mean_deviation_um: o.mean_deviation,
        steps_accepted: o.stats.accepted,
        steps_rejected: o.stats.rejected,
        rhs_evaluations: o.stats.evaluations,
        geometry_refreshes: o.geometry_refreshes,
        g_c: network.g_c,
        elapsed_s: exp.elapsed_s(),
    };
    let meta = exp.meta(&p);
    let mut out = Artifacts::new();
    out.json("recall_outcome.json", &meta, &outcome)?;
    if let Some(points) = &o.trajectory {
        out.csv("trajectory.csv", &meta, &trajectory_csv(points, &o.centres));
    }
    Ok(out)
}
