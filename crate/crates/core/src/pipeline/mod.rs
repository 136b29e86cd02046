//! Memory discovery and measurement over any recall backend.
//!
//! `run_pipeline` samples attractors from random stimuli, clusters them on
//! overlap distance, screens each candidate by its zero-error recall, measures
//! a basin size from an adaptively sampled recall curve and counts memories
//! with basin `>= min_basin`, with bootstrap uncertainties throughout.

pub mod cluster;
pub mod fit;
pub mod oracle;

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Scoring;
use crate::error::{Error, Result};
use crate::hopfield::{linear_fit, mean_std};
use crate::rng::RandomSource;
use crate::spin::{apply_errors, SpinConfig, SpinKey};

pub use cluster::{ClusterTree, Linkage, Merge};
pub use fit::{crossing, fit_tanh, tanh_curve, FitMethod, Level, TanhFit};
pub use oracle::{DescentOracle, IdentityOracle, NetworkOracle, SemiclassicalOracle};

/// Attractor sample count by network size: 50, 100, 200, 400 for
/// `n <= 4, 8, 12` and above.
pub fn default_samples(n: usize) -> usize {
    match n {
        0..=4 => 50,
        5..=8 => 100,
        9..=12 => 200,
        _ => 400,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// `None` picks [`default_samples`].
    pub samples: Option<usize>,
    pub cut: f64,
    pub noise_floor: f64,
    pub linkage: Linkage,
    pub screen_trials: usize,
    pub pass_threshold: f64,
    pub adaptive_trials: usize,
    pub threshold: f64,
    pub lorentz_width: f64,
    pub basin_bootstrap: usize,
    pub capacity_bootstrap: usize,
    pub samples_bootstrap: usize,
    pub volume_bootstrap: usize,
    pub min_basin: f64,
    pub default_basin_err: f64,
    /// Only the reference sign pattern counts as a successful recall.
    pub strict: bool,
    /// Use exact recall probabilities when the backend provides them.
    pub exact: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            samples: None,
            cut: 1.0,
            noise_floor: 0.21,
            linkage: Linkage::Average,
            screen_trials: 30,
            pass_threshold: 0.75,
            adaptive_trials: 30,
            threshold: 0.5,
            lorentz_width: 1.5,
            basin_bootstrap: 100,
            capacity_bootstrap: 1000,
            samples_bootstrap: 500,
            volume_bootstrap: 100,
            min_basin: 1.0,
            default_basin_err: 0.3,
            strict: false,
            exact: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.into()));
        if self.samples == Some(0) {
            return bad("samples must be >= 1");
        }
        if !(self.cut > 0.0) || !(self.noise_floor >= 0.0) || self.noise_floor > self.cut {
            return bad("need 0 <= noise_floor <= cut, cut > 0");
        }
        if self.screen_trials == 0 {
            return bad("screen_trials must be >= 1");
        }
        for (name, v) in [("pass_threshold", self.pass_threshold), ("threshold", self.threshold)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Validation(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.lorentz_width > 0.0) || !(self.min_basin >= 0.0) || !(self.default_basin_err >= 0.0) {
            return bad("lorentz_width > 0, min_basin >= 0 and default_basin_err >= 0 required");
        }
        if self.basin_bootstrap < 2 || self.capacity_bootstrap < 2 || self.samples_bootstrap < 1 {
            return bad("bootstrap counts too small");
        }
        Ok(())
    }
}

/// Random uniform stimuli relaxed by the oracle. Sample `i` uses stream
/// `rng.split(i)` for both its stimulus and its dynamics.
pub fn sample_attractors(
    oracle: &dyn NetworkOracle,
    samples: usize,
    rng: &RandomSource,
) -> Result<Vec<SpinConfig>> {
    if samples == 0 {
        return Err(Error::Validation("samples must be >= 1".into()));
    }
    let n = oracle.n();
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.split(i);
            let stim = SpinConfig::random_binary(n, &mut r);
            oracle.recall(&stim, &mut r)
        })
        .collect()
}

/// A cluster of sampled attractors and the sign patterns that count as
/// recalling it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    /// Most frequent sign pattern among the members.
    pub reference: SpinConfig,
    /// Sample indices in the cluster.
    pub members: Vec<usize>,
    /// Sign patterns merged with the reference below the noise floor,
    /// reference first.
    pub accepted: Vec<SpinConfig>,
}

impl Candidate {
    pub fn single(reference: SpinConfig) -> Self {
        let r = reference.signs();
        Self { id: 0, reference: r.clone(), members: Vec::new(), accepted: vec![r] }
    }

    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn accepts(&self, out: &SpinConfig, strict: bool) -> bool {
        let key = SpinKey::from_values(out.values());
        if strict {
            key == self.reference.key()
        } else {
            self.accepted.iter().any(|a| a.key() == key)
        }
    }

    fn scoring(&self, strict: bool) -> Scoring {
        let twin = self.reference.negated().key();
        if !strict && self.accepted.iter().any(|a| a.key() == twin) {
            Scoring::TwinTolerant
        } else {
            Scoring::Exact
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub cut: f64,
    pub noise_floor: f64,
    pub linkage: Linkage,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self { cut: 1.0, noise_floor: 0.21, linkage: Linkage::Average }
    }
}

/// Average-linkage candidates cut at `cut`.
pub fn cluster_candidates(configs: &[SpinConfig], cut: f64, noise_floor: f64) -> Result<Vec<Candidate>> {
    Ok(cluster_candidates_with(configs, ClusterOptions { cut, noise_floor, linkage: Linkage::Average })?.1)
}

pub fn cluster_candidates_with(
    configs: &[SpinConfig],
    opts: ClusterOptions,
) -> Result<(ClusterTree, Vec<Candidate>)> {
    let tree = ClusterTree::build(configs, opts.linkage)?;
    let keys: Vec<SpinKey> = configs.iter().map(|c| c.key()).collect();
    let mut nodes = tree.cut_nodes(tree.root(), opts.cut);
    nodes.sort_by_key(|&x| tree.members(x)[0]);
    let mut out = Vec::with_capacity(nodes.len());
    for (id, node) in nodes.into_iter().enumerate() {
        let members = tree.members(node);
        let reference = most_frequent(&members, &keys);
        let rkey = keys[reference].clone();
        let mut best: Option<(usize, Vec<usize>)> = None;
        for sub in tree.cut_nodes(node, opts.noise_floor) {
            let m = tree.members(sub);
            let hits = m.iter().filter(|&&i| keys[i] == rkey).count();
            if best.as_ref().is_none_or(|(h, bm)| hits > *h || (hits == *h && m[0] < bm[0])) {
                best = Some((hits, m));
            }
        }
        let sub = best.map(|b| b.1).unwrap_or_default();
        let mut accepted = vec![configs[reference].signs()];
        let mut seen = vec![rkey];
        for &i in &sub {
            if !seen.contains(&keys[i]) {
                seen.push(keys[i].clone());
                accepted.push(configs[i].signs());
            }
        }
        out.push(Candidate { id, reference: configs[reference].signs(), members, accepted });
    }
    Ok((tree, out))
}

fn most_frequent(members: &[usize], keys: &[SpinKey]) -> usize {
    let mut counts: HashMap<&SpinKey, (usize, usize)> = HashMap::new();
    for &i in members {
        counts.entry(&keys[i]).or_insert((0, i)).0 += 1;
    }
    counts
        .values()
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|v| v.1)
        .unwrap_or(members[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub pass: bool,
    pub p0: f64,
    /// Zero-error outcomes; empty when `p0` is exact.
    pub outcomes: Vec<bool>,
}

/// Zero-error recall probability of the candidate's reference.
pub fn screen_candidate(
    oracle: &dyn NetworkOracle,
    candidate: &Candidate,
    trials: usize,
    pass_threshold: f64,
    strict: bool,
    rng: &mut RandomSource,
) -> Result<Screening> {
    if trials == 0 {
        return Err(Error::Validation("trials must be >= 1".into()));
    }
    let mut outcomes = Vec::with_capacity(trials);
    for _ in 0..trials {
        let out = oracle.recall(&candidate.reference, rng)?;
        outcomes.push(candidate.accepts(&out.signs(), strict));
    }
    let p0 = outcomes.iter().filter(|&&b| b).count() as f64 / trials as f64;
    Ok(Screening { pass: p0 >= pass_threshold, p0, outcomes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasinMethod {
    TanhFit,
    /// The fit failed; monotone interpolation of the level means was used.
    Interpolation,
    /// Exact recall probabilities at every error level.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub e: usize,
    pub p: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallTrial {
    pub e: usize,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallCurve {
    pub points: Vec<CurvePoint>,
    pub a: Option<[f64; 3]>,
    pub fit: Option<FitMethod>,
    pub method: BasinMethod,
    pub threshold: f64,
    pub basin: f64,
    pub basin_err: f64,
    /// `p - fit(e)` per point (empty without a fit).
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub trials: Vec<RecallTrial>,
}

impl RecallCurve {
    /// Basin at least `min_basin`. Exact curves also require the recall at
    /// every integer error count up to `min_basin` to exceed the threshold.
    pub fn is_memory(&self, min_basin: f64) -> bool {
        match self.method {
            BasinMethod::Exact => {
                let top = min_basin.ceil() as usize;
                self.points.iter().filter(|p| p.e <= top).all(|p| p.p > self.threshold)
                    && self.basin >= min_basin
            }
            _ => self.basin >= min_basin,
        }
    }
}

fn levels_of(trials: &[RecallTrial]) -> Vec<Level> {
    let mut acc: Vec<(usize, usize, usize)> = Vec::new();
    for t in trials {
        match acc.iter_mut().find(|x| x.0 == t.e) {
            Some(x) => {
                x.1 += t.success as usize;
                x.2 += 1;
            }
            None => acc.push((t.e, t.success as usize, 1)),
        }
    }
    acc.sort_unstable();
    acc.into_iter()
        .map(|(e, s, c)| Level { e: e as f64, p: s as f64 / c as f64, w: c as f64 })
        .collect()
}

/// Basin from a fitted curve, clamped to `[0, e_max]`.
pub fn tanh_basin(a: &[f64; 3], threshold: f64, e_max: usize) -> f64 {
    let top = e_max as f64;
    if a[1] > 0.0 {
        crossing(a, threshold).map_or(0.0, |b| b.clamp(0.0, top))
    } else if tanh_curve(a, 0.0) >= threshold {
        top
    } else {
        0.0
    }
}

fn basin_from(trials: &[RecallTrial], threshold: f64, e_max: usize) -> (f64, Option<TanhFit>, Vec<Level>) {
    let levels = levels_of(trials);
    match fit_tanh(&levels, e_max) {
        Some(f) => (tanh_basin(&f.a, threshold, e_max), Some(f), levels),
        None => {
            let iso = fit::isotonic_decreasing(&levels);
            let b = fit::interpolated_crossing(&iso, threshold).clamp(0.0, e_max as f64);
            (b, None, levels)
        }
    }
}

/// Adaptive basin estimate. `zero_error` are the screening outcomes, reused
/// as the `e = 0` data. The first adaptive error count is uniform on
/// `[1, n/2]`; each later one is drawn with weight `1 / ((e - b)^2 + w^2)`
/// around the current basin estimate `b`.
pub fn estimate_basin(
    oracle: &dyn NetworkOracle,
    candidate: &Candidate,
    zero_error: &[bool],
    config: &PipelineConfig,
    rng: &mut RandomSource,
) -> Result<RecallCurve> {
    let n = oracle.n();
    let e_max = n / 2;
    if e_max == 0 {
        return Err(Error::Validation("basin estimation needs n >= 2".into()));
    }
    if config.exact {
        if let Some(curve) = exact_curve(oracle, candidate, config)? {
            return Ok(curve);
        }
    }
    let mut trials: Vec<RecallTrial> = zero_error.iter().map(|&s| RecallTrial { e: 0, success: s }).collect();
    let mut b = None;
    for _ in 0..config.adaptive_trials {
        let e = match b {
            None => rng.random_range(1..=e_max),
            Some(b) => lorentz_draw(b, config.lorentz_width, e_max, rng),
        };
        let stim = apply_errors(&candidate.reference, e, rng)?;
        let out = oracle.recall(&stim, rng)?;
        trials.push(RecallTrial { e, success: candidate.accepts(&out.signs(), config.strict) });
        b = Some(basin_from(&trials, config.threshold, e_max).0);
    }
    let (basin, fitted, levels) = basin_from(&trials, config.threshold, e_max);
    let mut boots = Vec::with_capacity(config.basin_bootstrap);
    let mut resample = vec![RecallTrial { e: 0, success: false }; trials.len()];
    for _ in 0..config.basin_bootstrap {
        for slot in resample.iter_mut() {
            *slot = trials[rng.random_range(0..trials.len())];
        }
        boots.push(basin_from(&resample, config.threshold, e_max).0);
    }
    let (_, sd) = mean_std(&boots);
    let basin_err = if sd.is_finite() && sd > 0.0 { sd } else { config.default_basin_err };
    let points: Vec<CurvePoint> = levels
        .iter()
        .map(|l| CurvePoint { e: l.e as usize, p: l.p, trials: l.w as usize })
        .collect();
    let residuals = fitted
        .map(|f| levels.iter().map(|l| l.p - tanh_curve(&f.a, l.e)).collect())
        .unwrap_or_default();
    Ok(RecallCurve {
        points,
        a: fitted.map(|f| f.a),
        fit: fitted.map(|f| f.method),
        method: if fitted.is_some() { BasinMethod::TanhFit } else { BasinMethod::Interpolation },
        threshold: config.threshold,
        basin,
        basin_err,
        residuals,
        trials,
    })
}

fn lorentz_draw(b: f64, width: f64, e_max: usize, rng: &mut RandomSource) -> usize {
    let w: Vec<f64> = (1..=e_max).map(|e| 1.0 / ((e as f64 - b).powi(2) + width * width)).collect();
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, wk) in w.iter().enumerate() {
        if u < *wk {
            return k + 1;
        }
        u -= wk;
    }
    e_max
}

fn exact_curve(
    oracle: &dyn NetworkOracle,
    candidate: &Candidate,
    config: &PipelineConfig,
) -> Result<Option<RecallCurve>> {
    let e_max = oracle.n() / 2;
    let scoring = candidate.scoring(config.strict);
    let mut points = Vec::with_capacity(e_max + 1);
    for e in 0..=e_max {
        match oracle.exact_recall(&candidate.reference, e, scoring)? {
            Some(p) => points.push(CurvePoint { e, p, trials: 0 }),
            None => return Ok(None),
        }
    }
    let levels: Vec<Level> = points.iter().map(|p| Level { e: p.e as f64, p: p.p, w: 1.0 }).collect();
    let basin = fit::interpolated_crossing(&levels, config.threshold).clamp(0.0, e_max as f64);
    Ok(Some(RecallCurve {
        points,
        a: None,
        fit: None,
        method: BasinMethod::Exact,
        threshold: config.threshold,
        basin,
        basin_err: 0.0,
        residuals: Vec::new(),
        trials: Vec::new(),
    }))
}

/// `2^n N_i / N_total`.
pub fn basin_volume(n_i: usize, n_total: usize, n: usize) -> Result<f64> {
    if n_total == 0 {
        return Err(Error::Validation("N_total must be >= 1".into()));
    }
    if n_i > n_total {
        return Err(Error::Validation(format!("N_i = {n_i} exceeds N_total = {n_total}")));
    }
    Ok(2f64.powi(n as i32) * n_i as f64 / n_total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplesRow {
    pub m: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesCurve {
    pub rows: Vec<SamplesRow>,
    /// Linear extrapolation of the mean count to `1/m -> 0`.
    pub intercept: f64,
    pub slope: f64,
    /// Mean count at the largest `m` over the intercept.
    pub fraction: f64,
}

/// Ten subsample sizes spread evenly up to `total`.
pub fn default_sizes(total: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=10).map(|k| (total * k).div_ceil(10).max(1)).collect();
    out.dedup();
    out
}

/// Bootstrap count of distinct memories versus subsample size. `labels[i]`
/// is the memory found by sample `i`, if any. The line is fitted over the
/// sizes `m >= total / 2`.
pub fn capacity_vs_samples(
    labels: &[Option<usize>],
    sizes: &[usize],
    reps: usize,
    rng: &mut RandomSource,
) -> Result<SamplesCurve> {
    if labels.is_empty() || sizes.is_empty() || reps == 0 {
        return Err(Error::Validation("need samples, sizes and reps".into()));
    }
    let total = labels.len();
    let mut rows = Vec::with_capacity(sizes.len());
    let kinds = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut seen = vec![0usize; kinds];
    let mut stamp = 0usize;
    for &m in sizes {
        if m == 0 {
            return Err(Error::Validation("subsample size must be >= 1".into()));
        }
        let mut counts = Vec::with_capacity(reps);
        for _ in 0..reps {
            stamp += 1;
            let mut c = 0usize;
            for _ in 0..m {
                if let Some(k) = labels[rng.random_range(0..total)] {
                    if seen[k] != stamp {
                        seen[k] = stamp;
                        c += 1;
                    }
                }
            }
            counts.push(c as f64);
        }
        let (mean, std) = mean_std(&counts);
        rows.push(SamplesRow { m, mean, std });
    }
    let mut fit_rows: Vec<&SamplesRow> = rows.iter().filter(|r| 2 * r.m >= total).collect();
    if fit_rows.len() < 2 {
        fit_rows = rows.iter().collect();
    }
    let (intercept, slope) = if fit_rows.len() >= 2 {
        let xs: Vec<f64> = fit_rows.iter().map(|r| 1.0 / r.m as f64).collect();
        let ys: Vec<f64> = fit_rows.iter().map(|r| r.mean).collect();
        linear_fit(&xs, &ys)?
    } else {
        (rows[0].mean, 0.0)
    };
    let last = rows.iter().max_by_key(|r| r.m).unwrap().mean;
    let fraction = if intercept > 0.0 { last / intercept } else { 1.0 };
    Ok(SamplesCurve { rows, intercept, slope, fraction })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub id: usize,
    pub reference: SpinConfig,
    pub count: usize,
    pub accepted_patterns: usize,
    pub p0: f64,
    pub screened: bool,
    pub curve: Option<RecallCurve>,
    pub is_memory: bool,
    pub volume: f64,
    pub volume_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub oracle: String,
    pub n: usize,
    pub samples: usize,
    pub config: PipelineConfig,
    pub candidates: Vec<CandidateReport>,
    pub memories: Vec<SpinConfig>,
    /// Point count of memories.
    pub capacity_count: usize,
    /// Mean and standard deviation of the bootstrap capacity distribution.
    pub capacity: f64,
    pub capacity_err: f64,
    /// `2^n / capacity`, absent for zero capacity.
    pub volume_bound: Option<f64>,
    pub memory_volume_total: f64,
    pub capacity_vs_samples: SamplesCurve,
    pub tree: ClusterTree,
}

impl PipelineReport {
    pub const TRIALS_HEADER: &'static str = "candidate,e,success";

    /// Every recall trial: candidate id, error count, outcome.
    pub fn trials_csv(&self) -> String {
        let mut out = format!("{}\n", Self::TRIALS_HEADER);
        for c in &self.candidates {
            if let Some(curve) = &c.curve {
                for t in &curve.trials {
                    out.push_str(&format!("{},{},{}\n", c.id, t.e, t.success as u8));
                }
            }
        }
        out
    }
}

struct Measured {
    screening: Screening,
    curve: Option<RecallCurve>,
}

fn measure(
    oracle: &dyn NetworkOracle,
    cand: &Candidate,
    config: &PipelineConfig,
    rng: &RandomSource,
) -> Result<Measured> {
    let mut r = rng.split_path(&[1, cand.id as u64]);
    let screening = if config.exact {
        match oracle.exact_recall(&cand.reference, 0, cand.scoring(config.strict))? {
            Some(p0) => Screening { pass: p0 >= config.pass_threshold, p0, outcomes: Vec::new() },
            None => screen_candidate(oracle, cand, config.screen_trials, config.pass_threshold, config.strict, &mut r)?,
        }
    } else {
        screen_candidate(oracle, cand, config.screen_trials, config.pass_threshold, config.strict, &mut r)?
    };
    let curve = if screening.pass {
        Some(estimate_basin(oracle, cand, &screening.outcomes, config, &mut r)?)
    } else {
        None
    };
    Ok(Measured { screening, curve })
}

/// Full pipeline. Streams: samples `split(0)`, candidate `k` `split_path([1, k])`,
/// capacity bootstrap `split(2)`, sample-size curve `split(3)`, volumes `split(4)`.
pub fn run_pipeline(
    oracle: &dyn NetworkOracle,
    config: &PipelineConfig,
    rng: &RandomSource,
) -> Result<PipelineReport> {
    config.validate()?;
    let n = oracle.n();
    let samples = config.samples.unwrap_or_else(|| default_samples(n));
    let configs = sample_attractors(oracle, samples, &rng.split(0))?;
    let (tree, candidates) = cluster_candidates_with(
        &configs,
        ClusterOptions { cut: config.cut, noise_floor: config.noise_floor, linkage: config.linkage },
    )?;
    let measured: Vec<Measured> = candidates
        .par_iter()
        .map(|c| measure(oracle, c, config, rng))
        .collect::<Result<_>>()?;

    let memory_flags: Vec<bool> = measured
        .iter()
        .map(|m| m.curve.as_ref().is_some_and(|c| c.is_memory(config.min_basin)))
        .collect();

    let mut boot = rng.split(2);
    let mut caps = Vec::with_capacity(config.capacity_bootstrap);
    for _ in 0..config.capacity_bootstrap {
        let mut count = 0usize;
        for (m, &flag) in measured.iter().zip(&memory_flags) {
            let Some(curve) = &m.curve else { continue };
            let hit = match curve.method {
                BasinMethod::Exact => flag,
                _ => {
                    let z: f64 = boot.sample(StandardNormal);
                    (curve.basin + curve.basin_err * z).max(0.0) >= config.min_basin
                }
            };
            count += hit as usize;
        }
        caps.push(count as f64);
    }
    let (capacity, capacity_err) = mean_std(&caps);

    let mut label = vec![usize::MAX; samples];
    for c in &candidates {
        for &i in &c.members {
            label[i] = c.id;
        }
    }
    let mut vboot = rng.split(4);
    let mut vols: Vec<Vec<f64>> = vec![Vec::with_capacity(config.volume_bootstrap); candidates.len()];
    let mut counts = vec![0usize; candidates.len()];
    for _ in 0..config.volume_bootstrap {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..samples {
            counts[label[vboot.random_range(0..samples)]] += 1;
        }
        for (k, v) in vols.iter_mut().enumerate() {
            v.push(basin_volume(counts[k], samples, n)?);
        }
    }

    let memory_labels: Vec<Option<usize>> = label.iter().map(|&l| memory_flags[l].then_some(l)).collect();
    let sizes = default_sizes(samples);
    let curve = capacity_vs_samples(&memory_labels, &sizes, config.samples_bootstrap, &mut rng.split(3))?;

    let mut reports = Vec::with_capacity(candidates.len());
    let mut memories = Vec::new();
    let mut total_volume = 0.0;
    for ((c, m), &flag) in candidates.iter().zip(measured).zip(&memory_flags) {
        let volume = basin_volume(c.count(), samples, n)?;
        let volume_err = if config.volume_bootstrap >= 2 { mean_std(&vols[c.id]).1 } else { 0.0 };
        if flag {
            memories.push(c.reference.clone());
            total_volume += volume;
        }
        reports.push(CandidateReport {
            id: c.id,
            reference: c.reference.clone(),
            count: c.count(),
            accepted_patterns: c.accepted.len(),
            p0: m.screening.p0,
            screened: m.screening.pass,
            curve: m.curve,
            is_memory: flag,
            volume,
            volume_err,
        });
    }
    Ok(PipelineReport {
        oracle: oracle.label(),
        n,
        samples,
        config: config.clone(),
        capacity_count: memories.len(),
        memories,
        candidates: reports,
        capacity,
        capacity_err,
        volume_bound: (capacity > 0.0).then(|| 2f64.powi(n as i32) / capacity),
        memory_volume_total: total_volume,
        capacity_vs_samples: curve,
        tree,
    })
}

/// Bootstrap capacity, its uncertainty and the memory list.
pub fn capacity(
    oracle: &dyn NetworkOracle,
    config: &PipelineConfig,
    rng: &RandomSource,
) -> Result<(f64, f64, Vec<SpinConfig>)> {
    let r = run_pipeline(oracle, config, rng)?;
    Ok((r.capacity, r.capacity_err, r.memories))
}

/// Semiclassical capacity of a network under the given noise channels.
pub fn network_capacity_sim(
    network: &crate::semiclassical::Network,
    noise: crate::semiclassical::NoiseModel,
    config: &PipelineConfig,
    rng: &RandomSource,
) -> Result<(f64, f64)> {
    let oracle = SemiclassicalOracle::new(network.clone(), noise)?;
    let (c, err, _) = capacity(&oracle, config, rng)?;
    Ok((c, err))
}
