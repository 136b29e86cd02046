use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{seed_state, EnergyTerms, Model, Network, NetworkState, TrialDrive};
use crate::cavity::Point;
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeStats};
use crate::rng::RandomSource;
use crate::spin::SpinConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Trap-centre jitter (µm).
    pub trap_sigma: f64,
    /// Relative stimulus amplitude jitter.
    pub amp_sigma: f64,
    /// Per-beam phase jitter (rad).
    pub phase_sigma: f64,
    /// Uniform global phase between stimulus and pump.
    pub global_phase: bool,
    pub trap: bool,
    pub stimulus: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::both()
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            trap_sigma: 0.5,
            amp_sigma: 0.1,
            phase_sigma: 0.3,
            global_phase: true,
            trap: false,
            stimulus: false,
        }
    }

    pub fn both() -> Self {
        Self {
            trap: true,
            stimulus: true,
            ..Self::none()
        }
    }

    pub fn trap_only() -> Self {
        Self {
            trap: true,
            ..Self::none()
        }
    }

    pub fn stimulus_only() -> Self {
        Self {
            stimulus: true,
            ..Self::none()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("trap_sigma", self.trap_sigma),
            ("amp_sigma", self.amp_sigma),
            ("phase_sigma", self.phase_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        !self.trap && !self.stimulus
    }

    /// Draws one realisation of trap centres and beam weights.
    ///
    /// The readout is referenced to the global phase, so a global phase with
    /// `cos < 0` weakens the stimulus but does not invert it.
    pub fn draw(
        &self,
        network: &Network,
        signs: &SpinConfig,
        rng: &mut RandomSource,
    ) -> Result<TrialDrive> {
        self.validate()?;
        let mut drive = TrialDrive::clean(network, signs)?;
        if self.trap && self.trap_sigma > 0.0 {
            let jitter = Normal::new(0.0, self.trap_sigma).expect("finite sigma");
            for c in &mut drive.centres {
                c[0] += jitter.sample(rng);
                c[1] += jitter.sample(rng);
            }
        }
        if self.stimulus {
            let amp = Normal::new(1.0, self.amp_sigma).expect("finite sigma");
            let phase = Normal::new(0.0, self.phase_sigma).expect("finite sigma");
            let global = if self.global_phase { rng.random_range(0.0..2.0 * PI) } else { 0.0 };
            let reference = if global.cos() < 0.0 { -1.0 } else { 1.0 };
            for w in &mut drive.beam_weights {
                let a: f64 = amp.sample(rng);
                let phi: f64 = phase.sample(rng);
                *w *= a * (global + phi).cos() * reference;
            }
        }
        Ok(drive)
    }
}

/// One sampled point of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: NetworkState,
    /// Energies in units of `omega_z * S`.
    pub energy: EnergyTerms,
    pub pump_ratio: f64,
    pub stimulus_envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub signs: SpinConfig,
    pub final_state: NetworkState,
    pub centres: Vec<Point>,
    /// Final energies in units of `omega_z * S`.
    pub energy: EnergyTerms,
    pub max_spin_length_error: f64,
    /// Mean `|r_i - r_i^0|` at the end (µm).
    pub mean_deviation: f64,
    pub stats: OdeStats,
    /// Full evaluations of the coupling geometry.
    pub geometry_refreshes: usize,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOptions {
    /// Sampling interval of the recorded trajectory (ms); `None` records none.
    pub trajectory_dt: Option<f64>,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self { trajectory_dt: None }
    }
}

/// Integrates one recall trial with the given per-trial drive. `seed_signs`
/// sets the direction of the symmetry-breaking tilt.
pub fn run_with_drive(
    network: &Network,
    drive: &TrialDrive,
    seed_signs: &[f64],
    options: TrialOptions,
) -> Result<TrialOutcome> {
    let n = network.n();
    let p = &network.params;
    if seed_signs.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: seed_signs.len(),
        });
    }
    let mut times = p.breakpoints();
    if let Some(dt) = options.trajectory_dt {
        if !(dt > 0.0) {
            return Err(Error::Validation(format!("trajectory interval must be positive, got {dt}")));
        }
        let steps = (p.t_end / dt).ceil() as usize;
        times.extend((1..steps).map(|k| k as f64 * dt));
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    }
    let start = seed_state(&drive.centres, seed_signs, p.seed_amplitude);
    let mut y = start.to_vec();
    let mut model = Model::new(network, drive);
    let mut probe = Model::new(network, drive);
    let mut max_err: f64 = 0.0;
    let mut trajectory = options.trajectory_dt.map(|_| Vec::new());
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| model.rhs(t, y, dy);
    let stats = integrate(&mut rhs, &mut y, &times, p.tolerance, |t, y| {
        let s = NetworkState::from_slice(y).expect("5n layout");
        max_err = max_err.max(s.spin_length_error());
        if let Some(tr) = trajectory.as_mut() {
            let energy = probe.energy(t, &s).per_spin_length(p.omega_z);
            tr.push(TrajectoryPoint {
                t,
                energy,
                pump_ratio: p.pump_ratio(t),
                stimulus_envelope: p.stimulus_envelope(t),
                state: s,
            });
        }
    })?;
    let geometry_refreshes = model.refreshes;
    let final_state = NetworkState::from_slice(&y)?;
    if final_state.sx.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(Error::Integrator {
            t: p.t_end,
            reason: "non-finite state".into(),
        });
    }
    let energy = probe.energy(p.t_end, &final_state).per_spin_length(p.omega_z);
    let mean_deviation = final_state
        .positions
        .iter()
        .zip(&drive.centres)
        .map(|(r, c)| (r[0] - c[0]).hypot(r[1] - c[1]))
        .sum::<f64>()
        / n as f64;
    Ok(TrialOutcome {
        signs: final_state.signs(),
        centres: drive.centres.clone(),
        final_state,
        energy,
        max_spin_length_error: max_err,
        mean_deviation,
        stats,
        geometry_refreshes,
        trajectory,
    })
}

/// One recall trial: draw noise, seed the symmetry breaking, integrate to
/// `t_end` and read `sign(Sx)`.
pub fn run_recall_trial(
    network: &Network,
    stimulus: &SpinConfig,
    noise: &NoiseModel,
    rng: &mut RandomSource,
    options: TrialOptions,
) -> Result<TrialOutcome> {
    let drive = noise.draw(network, stimulus, rng)?;
    let seed: Vec<f64> = (0..network.n())
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    run_with_drive(network, &drive, &seed, options)
}

/// Trajectory CSV: time, schedules, per-site spins and displacements, and the
/// four energy terms per `omega_z * S`.
pub fn trajectory_csv(points: &[TrajectoryPoint], centres: &[Point]) -> String {
    let n = centres.len();
    let mut head = vec!["t_ms".to_string(), "pump_ratio".into(), "stimulus_envelope".into()];
    for c in ["sx", "sy", "sz", "dx", "dy"] {
        head.extend((0..n).map(|i| format!("{c}_{i}")));
    }
    head.extend(["e_transverse", "e_ising", "e_stimulus", "e_trap", "e_total"].map(String::from));
    let mut out = head.join(",");
    out.push('\n');
    for p in points {
        let s = &p.state;
        let mut row = vec![p.t, p.pump_ratio, p.stimulus_envelope];
        row.extend(&s.sx);
        row.extend(&s.sy);
        row.extend(&s.sz);
        row.extend(s.positions.iter().zip(centres).map(|(r, c)| r[0] - c[0]));
        row.extend(s.positions.iter().zip(centres).map(|(r, c)| r[1] - c[1]));
        let e = p.energy;
        row.extend([e.transverse, e.ising, e.stimulus, e.trap, e.total()]);
        out.push_str(&row.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Mean final displacement over noise-free trials with the given stimuli.
pub fn mean_deviation(network: &Network, stimuli: &[SpinConfig], rng: &RandomSource) -> Result<f64> {
    if stimuli.is_empty() {
        return Err(Error::Validation("need at least one stimulus".into()));
    }
    let mut total = 0.0;
    for (k, s) in stimuli.iter().enumerate() {
        let mut r = rng.split(k as u64);
        total += run_recall_trial(network, s, &NoiseModel::none(), &mut r, TrialOptions::default())?.mean_deviation;
    }
    Ok(total / stimuli.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub e_trap: f64,
    pub deviation: f64,
    pub target: f64,
    pub trials: usize,
    pub iterations: usize,
}

/// Bisects `E_trap` on a log scale until the mean noise-free displacement
/// over `trials` random stimuli is within `rel_tol` of `target` (µm).
pub fn calibrate_trap_energy(
    network: &Network,
    target: f64,
    trials: usize,
    bracket: (f64, f64),
    rel_tol: f64,
    rng: &RandomSource,
) -> Result<Calibration> {
    if !(target > 0.0) {
        return Err(Error::Validation(format!("target deviation must be positive, got {target}")));
    }
    if trials == 0 {
        return Err(Error::Validation("calibration needs trials >= 1".into()));
    }
    let mut stim_rng = rng.split(u64::MAX);
    let stimuli: Vec<SpinConfig> = (0..trials)
        .map(|_| SpinConfig::random_binary(network.n(), &mut stim_rng))
        .collect();
    let eval = |e: f64| -> Result<f64> {
        let mut p = network.params;
        p.elasticity = super::model::Elasticity::Trap { e_trap: e };
        let net = Network::new(network.plan.clone(), network.cavity, p)?;
        mean_deviation(&net, &stimuli, rng)
    };
    let (mut lo, mut hi) = bracket;
    let (d_lo, d_hi) = (eval(lo)?, eval(hi)?);
    if !(d_lo >= target && d_hi <= target) {
        return Err(Error::Bracket(format!(
            "deviation {d_lo:.3} at E_trap={lo} and {d_hi:.3} at E_trap={hi} do not bracket {target}"
        )));
    }
    for it in 1..=60 {
        let mid = (lo * hi).sqrt();
        let d = eval(mid)?;
        if (d - target).abs() <= rel_tol * target {
            return Ok(Calibration {
                e_trap: mid,
                deviation: d,
                target,
                trials,
                iterations: it,
            });
        }
        if d > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Bracket(format!("no convergence between E_trap={lo} and {hi}")))
}
