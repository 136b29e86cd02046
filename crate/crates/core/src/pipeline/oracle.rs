//! Recall backends the pipeline can drive.

use crate::dynamics::{exact_recall_at, relax, DynamicsKind, Scoring};
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::semiclassical::{run_recall_trial, Network, NoiseModel, TrialOptions};
use crate::spin::{CouplingMatrix, SpinConfig};

/// Stateless recall interface: stimulus in, final configuration out.
pub trait NetworkOracle: Sync {
    fn n(&self) -> usize;

    fn recall(&self, stimulus: &SpinConfig, rng: &mut RandomSource) -> Result<SpinConfig>;

    /// Exact probability that `e` distinct random errors on `reference` relax
    /// back to it, when the backend can compute it.
    fn exact_recall(&self, _reference: &SpinConfig, _e: usize, _scoring: Scoring) -> Result<Option<f64>> {
        Ok(None)
    }

    fn label(&self) -> String;
}

/// Returns the stimulus unchanged.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOracle {
    pub n: usize,
}

impl NetworkOracle for IdentityOracle {
    fn n(&self) -> usize {
        self.n
    }

    fn recall(&self, stimulus: &SpinConfig, _rng: &mut RandomSource) -> Result<SpinConfig> {
        Ok(stimulus.clone())
    }

    fn exact_recall(&self, _reference: &SpinConfig, e: usize, _scoring: Scoring) -> Result<Option<f64>> {
        Ok(Some(if e == 0 { 1.0 } else { 0.0 }))
    }

    fn label(&self) -> String {
        "identity".into()
    }
}

/// Zero-temperature single-flip relaxation on a fixed coupling matrix
/// (SK or Hopfield).
#[derive(Debug, Clone)]
pub struct DescentOracle {
    pub j: CouplingMatrix,
    pub kind: DynamicsKind,
    pub max_states: usize,
}

impl DescentOracle {
    pub fn new(j: CouplingMatrix, kind: DynamicsKind) -> Self {
        Self { j, kind, max_states: 2_000_000 }
    }
}

impl NetworkOracle for DescentOracle {
    fn n(&self) -> usize {
        self.j.n()
    }

    fn recall(&self, stimulus: &SpinConfig, rng: &mut RandomSource) -> Result<SpinConfig> {
        relax(&self.j, &stimulus.signs(), self.kind, rng)
    }

    fn exact_recall(&self, reference: &SpinConfig, e: usize, scoring: Scoring) -> Result<Option<f64>> {
        exact_recall_at(&self.j, reference, e, self.kind, scoring, self.max_states)
    }

    fn label(&self) -> String {
        format!("descent/{}", self.kind)
    }
}

/// One semiclassical recall trial per call; the output is the normalized
/// final `<S^x>` vector.
#[derive(Debug, Clone)]
pub struct SemiclassicalOracle {
    pub network: Network,
    pub noise: NoiseModel,
}

impl SemiclassicalOracle {
    pub fn new(network: Network, noise: NoiseModel) -> Result<Self> {
        noise.validate()?;
        Ok(Self { network, noise })
    }
}

impl NetworkOracle for SemiclassicalOracle {
    fn n(&self) -> usize {
        self.network.n()
    }

    fn recall(&self, stimulus: &SpinConfig, rng: &mut RandomSource) -> Result<SpinConfig> {
        let out = run_recall_trial(&self.network, &stimulus.signs(), &self.noise, rng, TrialOptions::default())?;
        let sx = SpinConfig::new(out.final_state.sx)?;
        sx.unit().or_else(|_| Err(Error::Domain("final state has no transverse order".into())))
    }

    fn label(&self) -> String {
        "semiclassical".into()
    }
}
