//! Hebbian pattern storage and the one-spin-flip / threshold-recall capacity
//! of the Hopfield network.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{exact_single_flip_recall, recall_probability, DynamicsKind, Scoring};
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::spin::{CouplingMatrix, SpinConfig};

/// How the single-flip recall probability of a candidate memory is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum RecallEstimator {
    /// Monte Carlo over `trials` random single-flip corruptions.
    Sampled { trials: usize },
    /// Exact average over all `n` corruptions and all descent branches.
    /// Falls back to sampling with `fallback_trials` if the branch tree grows
    /// beyond the memo limit.
    Exact { fallback_trials: usize },
}

impl Default for RecallEstimator {
    fn default() -> Self {
        RecallEstimator::Sampled { trials: 100 }
    }
}

const EXACT_STATE_LIMIT: usize = 200_000;

impl RecallEstimator {
    /// Probability that a one-error stimulus relaxes back to `memory`.
    pub fn single_flip(
        &self,
        j: &CouplingMatrix,
        memory: &SpinConfig,
        kind: DynamicsKind,
        scoring: Scoring,
        rng: &mut RandomSource,
    ) -> Result<f64> {
        match *self {
            RecallEstimator::Sampled { trials } => {
                recall_probability(j, memory, 1, trials, kind, scoring, rng)
            }
            RecallEstimator::Exact { fallback_trials } => {
                match exact_single_flip_recall(j, memory, kind, scoring, EXACT_STATE_LIMIT)? {
                    Some(p) => Ok(p),
                    None => recall_probability(j, memory, 1, fallback_trials, kind, scoring, rng),
                }
            }
        }
    }
}

/// `P` binary patterns of common length `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    patterns: Vec<SpinConfig>,
}

impl PatternSet {
    pub fn new(patterns: Vec<SpinConfig>) -> Result<Self> {
        let first = patterns
            .first()
            .ok_or_else(|| Error::Validation("pattern set must contain P >= 1 patterns".into()))?;
        let n = first.len();
        for (p, xi) in patterns.iter().enumerate() {
            if xi.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: xi.len(),
                });
            }
            if !xi.is_binary() {
                return Err(Error::Validation(format!("pattern {p} is not binary")));
            }
        }
        Ok(Self { patterns })
    }

    /// `p` patterns drawn uniformly with replacement.
    pub fn random(n: usize, p: usize, rng: &mut RandomSource) -> Result<Self> {
        Self::new((0..p).map(|_| SpinConfig::random_binary(n, rng)).collect())
    }

    pub fn n(&self) -> usize {
        self.patterns[0].len()
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn patterns(&self) -> &[SpinConfig] {
        &self.patterns
    }
}

/// `J_ij = sum_p xi_i^p xi_j^p` off the diagonal, zero on it.
pub fn hebbian(patterns: &PatternSet) -> CouplingMatrix {
    let n = patterns.n();
    let mut entries = vec![0.0; n * n];
    for xi in patterns.patterns() {
        let v = xi.values();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    entries[i * n + j] += v[i] * v[j];
                }
            }
        }
    }
    CouplingMatrix::new(n, entries).expect("Hebbian sums are symmetric and finite")
}

/// Memory criterion shared by the Hopfield and SK benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryCriterion {
    pub threshold: f64,
    pub kind: DynamicsKind,
    pub estimator: RecallEstimator,
    pub scoring: Scoring,
}

impl Default for MemoryCriterion {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            kind: DynamicsKind::MH,
            estimator: RecallEstimator::default(),
            scoring: Scoring::Exact,
        }
    }
}

impl MemoryCriterion {
    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Validation(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if let RecallEstimator::Sampled { trials: 0 } = self.estimator {
            return Err(Error::Validation("trials must be >= 1".into()));
        }
        Ok(())
    }

    /// True when the single-flip recall probability exceeds the threshold.
    pub fn is_memory(
        &self,
        j: &CouplingMatrix,
        memory: &SpinConfig,
        rng: &mut RandomSource,
    ) -> Result<bool> {
        let p = self
            .estimator
            .single_flip(j, memory, self.kind, self.scoring, rng)?;
        Ok(p > self.threshold)
    }
}

/// Number of patterns, distinct up to a global flip, whose single-flip recall probability under the
/// Hebbian couplings exceeds the threshold.
pub fn stored_memory_count(
    patterns: &PatternSet,
    criterion: &MemoryCriterion,
    rng: &mut RandomSource,
) -> Result<usize> {
    criterion.validate()?;
    let j = hebbian(patterns);
    let mut seen = HashSet::new();
    let mut count = 0;
    for xi in patterns.patterns() {
        if !seen.insert(xi.canonical().key()) {
            continue;
        }
        if criterion.is_memory(&j, xi, rng)? {
            count += 1;
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub n: usize,
    pub p: usize,
    pub mean: f64,
    pub std: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySweep {
    pub rows: Vec<CapacityRow>,
    pub argmax_p: usize,
    pub max_mean: f64,
    /// Disorder standard deviation at the argmax.
    pub max_std: f64,
}

/// Mean and standard deviation of `stored_memory_count` over random pattern
/// sets for every `P` in `p_range`.
pub fn capacity_sweep(
    n: usize,
    p_range: &[usize],
    realizations: usize,
    criterion: &MemoryCriterion,
    rng: &RandomSource,
) -> Result<CapacitySweep> {
    if p_range.is_empty() {
        return Err(Error::Validation("P range must not be empty".into()));
    }
    if realizations == 0 {
        return Err(Error::Validation("realizations must be >= 1".into()));
    }
    criterion.validate()?;
    let mut rows = Vec::with_capacity(p_range.len());
    for &p in p_range {
        if p == 0 {
            return Err(Error::Validation("P must be >= 1".into()));
        }
        let counts = (0..realizations)
            .into_par_iter()
            .map(|r| {
                let mut stream = rng.split_path(&[n as u64, p as u64, r as u64]);
                let patterns = PatternSet::random(n, p, &mut stream)?;
                stored_memory_count(&patterns, criterion, &mut stream).map(|c| c as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean, std) = mean_std(&counts);
        rows.push(CapacityRow {
            n,
            p,
            mean,
            std,
            realizations,
        });
    }
    let best = rows
        .iter()
        .max_by(|a, b| a.mean.total_cmp(&b.mean))
        .expect("non-empty");
    Ok(CapacitySweep {
        argmax_p: best.p,
        max_mean: best.mean,
        max_std: best.std,
        rows,
    })
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    (m, v.sqrt())
}

/// Ordinary least-squares line `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Validation("linear fit needs >= 2 paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Validation("linear fit needs distinct x values".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}
