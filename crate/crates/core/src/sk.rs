//! Sherrington-Kirkpatrick disorder and its associative-memory statistics.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    enumerate_minima, exact_single_flip_recall, minima_by_restarts, recall_probability,
    DynamicsKind, Scoring,
};
use crate::error::{Error, Result};
use crate::hopfield::mean_std;
use crate::rng::RandomSource;
use crate::spin::{CouplingMatrix, SpinConfig};

/// Largest `n` for which minima are enumerated exhaustively by default.
pub const SK_EXHAUSTIVE_MAX: usize = 20;

const EXACT_STATE_LIMIT: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkRealization {
    pub j: CouplingMatrix,
    pub n: usize,
    pub seed: u64,
}

/// Symmetric couplings with iid `N(0, 1)` off-diagonal entries.
pub fn sample_sk(n: usize, rng: &mut RandomSource) -> Result<SkRealization> {
    if n < 2 {
        return Err(Error::Validation(format!("SK needs n >= 2, got {n}")));
    }
    let seed = rng.seed();
    let j = CouplingMatrix::from_upper(n, |a, b| {
        if a == b {
            0.0
        } else {
            StandardNormal.sample(rng)
        }
    })?;
    Ok(SkRealization { j, n, seed })
}

/// How minima are collected for one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum MinimaSearch {
    Exhaustive,
    Restarts { starts: usize },
}

impl MinimaSearch {
    /// Exhaustive up to `SK_EXHAUSTIVE_MAX`, restarts beyond.
    pub fn for_size(n: usize, starts: usize) -> Self {
        if n <= SK_EXHAUSTIVE_MAX {
            MinimaSearch::Exhaustive
        } else {
            MinimaSearch::Restarts { starts }
        }
    }

    pub fn minima(
        &self,
        j: &CouplingMatrix,
        kind: DynamicsKind,
        rng: &mut RandomSource,
    ) -> Result<Vec<SpinConfig>> {
        match *self {
            MinimaSearch::Exhaustive => enumerate_minima(j),
            MinimaSearch::Restarts { starts } => minima_by_restarts(j, starts, kind, rng),
        }
    }
}

/// Settings shared by `memory_fraction` and `sk_capacity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkSettings {
    pub kind: DynamicsKind,
    pub threshold: f64,
    pub search: MinimaSearch,
    /// Trials per minimum when the exact recall recursion is too large.
    pub trials: usize,
    pub scoring: Scoring,
}

impl SkSettings {
    pub fn new(n: usize, kind: DynamicsKind, threshold: f64) -> Self {
        Self {
            kind,
            threshold,
            search: MinimaSearch::for_size(n, 54_000),
            trials: 100,
            scoring: Scoring::Exact,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Validation(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.trials == 0 {
            return Err(Error::Validation("trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// Single-flip recall probability of one minimum: exact when the branch tree
/// is small enough, sampled otherwise.
pub fn single_flip_recall(
    j: &CouplingMatrix,
    memory: &SpinConfig,
    settings: &SkSettings,
    rng: &mut RandomSource,
) -> Result<f64> {
    match exact_single_flip_recall(j, memory, settings.kind, settings.scoring, EXACT_STATE_LIMIT)? {
        Some(p) => Ok(p),
        None => recall_probability(j, memory, 1, settings.trials, settings.kind, settings.scoring, rng),
    }
}

/// Memory statistics of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizationMemories {
    pub minima: usize,
    pub memories: usize,
}

/// Minima and how many of them pass the single-flip memory test.
pub fn realization_memories(
    j: &CouplingMatrix,
    settings: &SkSettings,
    rng: &mut RandomSource,
) -> Result<RealizationMemories> {
    settings.validate()?;
    let minima = settings.search.minima(j, settings.kind, rng)?;
    let mut memories = 0;
    for m in &minima {
        if single_flip_recall(j, m, settings, rng)? > settings.threshold {
            memories += 1;
        }
    }
    Ok(RealizationMemories {
        minima: minima.len(),
        memories,
    })
}

/// Disorder-averaged summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkRow {
    pub n: usize,
    pub kind: DynamicsKind,
    pub threshold: f64,
    pub realizations: usize,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub seed: u64,
}

impl SkRow {
    pub const CSV_HEADER: &'static str = "n,kind,threshold,realizations,mean,std,stderr,seed";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n, self.kind, self.threshold, self.realizations, self.mean, self.std, self.stderr, self.seed
        )
    }
}

fn per_realization(
    n: usize,
    settings: &SkSettings,
    realizations: usize,
    rng: &RandomSource,
) -> Result<Vec<RealizationMemories>> {
    if realizations == 0 {
        return Err(Error::Validation("realizations must be >= 1".into()));
    }
    settings.validate()?;
    (0..realizations)
        .into_par_iter()
        .map(|r| {
            let mut disorder = rng.split_path(&[n as u64, r as u64, 0]);
            let mut dynamics = rng.split_path(&[n as u64, r as u64, 1]);
            let sk = sample_sk(n, &mut disorder)?;
            realization_memories(&sk.j, settings, &mut dynamics)
        })
        .collect()
}

fn row(n: usize, settings: &SkSettings, realizations: usize, seed: u64, xs: &[f64]) -> SkRow {
    let (mean, std) = mean_std(xs);
    let stderr = if xs.len() > 1 {
        std * (xs.len() as f64 / (xs.len() - 1) as f64).sqrt() / (xs.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    SkRow {
        n,
        kind: settings.kind,
        threshold: settings.threshold,
        realizations,
        mean,
        std,
        stderr,
        seed,
    }
}

/// Fraction of local minima that are memories, averaged over realizations.
/// `mean` is the mean fraction and `stderr` its standard error.
pub fn memory_fraction(
    n: usize,
    settings: &SkSettings,
    realizations: usize,
    rng: &RandomSource,
) -> Result<SkRow> {
    sk_summary(n, settings, realizations, rng).map(|s| s.fraction)
}

pub fn sk_capacity(
    n: usize,
    settings: &SkSettings,
    realizations: usize,
    rng: &RandomSource,
) -> Result<SkRow> {
    sk_summary(n, settings, realizations, rng).map(|s| s.capacity)
}

/// Capacity and memory fraction from one set of realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkSummary {
    pub capacity: SkRow,
    pub fraction: SkRow,
    /// Mean number of local minima (up to global flip).
    pub mean_minima: f64,
}

pub fn sk_summary(
    n: usize,
    settings: &SkSettings,
    realizations: usize,
    rng: &RandomSource,
) -> Result<SkSummary> {
    if settings.search == MinimaSearch::Exhaustive && n > crate::dynamics::EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: crate::dynamics::EXHAUSTIVE_LIMIT,
        });
    }
    let stats = per_realization(n, settings, realizations, rng)?;
    let caps: Vec<f64> = stats.iter().map(|s| s.memories as f64).collect();
    let fracs: Vec<f64> = stats
        .iter()
        .map(|s| s.memories as f64 / s.minima.max(1) as f64)
        .collect();
    let mins: Vec<f64> = stats.iter().map(|s| s.minima as f64).collect();
    Ok(SkSummary {
        capacity: row(n, settings, realizations, rng.seed(), &caps),
        fraction: row(n, settings, realizations, rng.seed(), &fracs),
        mean_minima: mean_std(&mins).0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::is_local_min;

    #[test]
    fn same_seed_same_matrix() {
        let a = sample_sk(9, &mut RandomSource::new(3)).unwrap();
        let b = sample_sk(9, &mut RandomSource::new(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.j.diagonal().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn moments() {
        let sk = sample_sk(142, &mut RandomSource::new(11)).unwrap();
        let mut xs = Vec::new();
        for a in 0..142 {
            for b in a + 1..142 {
                xs.push(sk.j.get(a, b));
            }
        }
        let (m, s) = mean_std(&xs);
        assert!(m.abs() < 3.0 / (xs.len() as f64).sqrt());
        assert!((s * s - 1.0).abs() < 0.03, "variance {}", s * s);
    }

    #[test]
    fn two_spins_fraction_is_one() {
        let rng = RandomSource::new(5);
        let mut s = SkSettings::new(2, DynamicsKind::SD, 0.5);
        // a corrupted pair sits on an exact tie: half the branches reach the twin
        let mut r = RandomSource::new(1);
        let sk = sample_sk(2, &mut r).unwrap();
        let m = &enumerate_minima(&sk.j).unwrap()[0];
        assert_eq!(single_flip_recall(&sk.j, m, &s, &mut r).unwrap(), 0.5);
        assert_eq!(memory_fraction(2, &s, 20, &rng).unwrap().mean, 0.0);
        s.scoring = Scoring::TwinTolerant;
        assert_eq!(memory_fraction(2, &s, 20, &rng).unwrap().mean, 1.0);
    }

    fn brute_capacity_sd(j: &CouplingMatrix) -> usize {
        // direct energy tables, no incremental fields
        let n = j.n();
        let energy = |bits: u64| {
            let s = SpinConfig::from_bits(n, bits);
            crate::spin::ising_energy(j, &s).unwrap()
        };
        let e: Vec<f64> = (0..1u64 << n).map(energy).collect();
        let descend = |mut b: u64| loop {
            let (k, de) = (0..n)
                .map(|k| (k, e[(b ^ (1 << k)) as usize] - e[b as usize]))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            if de >= 0.0 {
                return b;
            }
            b ^= 1 << k;
        };
        (0..1u64 << (n - 1))
            .filter(|&b| (0..n).all(|k| e[(b ^ (1 << k)) as usize] >= e[b as usize]))
            .filter(|&b| {
                let back = (0..n).filter(|&k| descend(b ^ (1 << k)) == b).count();
                back as f64 / n as f64 > 0.5
            })
            .count()
    }

    #[test]
    fn capacity_matches_brute_force() {
        let settings = SkSettings::new(4, DynamicsKind::SD, 0.5);
        for seed in 0..50 {
            let mut r = RandomSource::new(seed);
            let sk = sample_sk(4, &mut r).unwrap();
            let got = realization_memories(&sk.j, &settings, &mut r).unwrap();
            assert_eq!(got.memories, brute_capacity_sd(&sk.j), "seed {seed}");
        }
        let settings = SkSettings::new(9, DynamicsKind::SD, 0.5);
        for seed in 0..10 {
            let mut r = RandomSource::new(seed);
            let sk = sample_sk(9, &mut r).unwrap();
            let got = realization_memories(&sk.j, &settings, &mut r).unwrap();
            assert_eq!(got.memories, brute_capacity_sd(&sk.j), "seed {seed}");
        }
    }

    #[test]
    fn counted_memories_are_minima() {
        let mut r = RandomSource::new(8);
        let sk = sample_sk(10, &mut r).unwrap();
        for m in enumerate_minima(&sk.j).unwrap() {
            assert!(is_local_min(&sk.j, &m).unwrap());
        }
    }

    #[test]
    fn scale_invariance() {
        let mut r = RandomSource::new(21);
        let sk = sample_sk(10, &mut r).unwrap();
        let scaled = sk.j.scaled(3.7).unwrap();
        for kind in [DynamicsKind::SD, DynamicsKind::MH] {
            let s = SkSettings::new(10, kind, 0.5);
            let a = realization_memories(&sk.j, &s, &mut RandomSource::new(1)).unwrap();
            let b = realization_memories(&scaled, &s, &mut RandomSource::new(1)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn higher_threshold_fewer_memories() {
        let rng = RandomSource::new(4);
        for kind in [DynamicsKind::SD, DynamicsKind::MH] {
            let lo = sk_capacity(10, &SkSettings::new(10, kind, 0.5), 40, &rng).unwrap();
            let hi = sk_capacity(10, &SkSettings::new(10, kind, 0.75), 40, &rng).unwrap();
            assert!(hi.mean <= lo.mean);
        }
    }

    #[test]
    fn exhaustive_refused_beyond_limit() {
        let mut s = SkSettings::new(30, DynamicsKind::SD, 0.5);
        s.search = MinimaSearch::Exhaustive;
        assert!(matches!(
            sk_capacity(30, &s, 1, &RandomSource::new(0)),
            Err(Error::TooLarge { .. })
        ));
    }
}
