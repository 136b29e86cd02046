//! Semiclassical recall dynamics: Bloch vectors coupled to overdamped
//! ensemble positions under pump and stimulus ramps.

mod model;
mod trial;

pub use model::{
    Elasticity, EnergyTerms, Model, Network, NetworkState, SimParams, ThresholdConvention,
    TrialDrive, DEFAULT_E_TRAP, SPIN,
};
pub use trial::{
    calibrate_trap_energy, mean_deviation, Calibration, run_recall_trial, run_with_drive, trajectory_csv, NoiseModel, TrajectoryPoint, TrialOptions,
    TrialOutcome,
};
