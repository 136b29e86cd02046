//! Zero-temperature relaxation on binary energy landscapes.
//!
//! Three single-spin-flip dynamics are provided:
//!
//! * `MH`: zero-temperature Metropolis-Hastings. Every energy-lowering flip is
//!   equally likely to be the next one taken.
//! * `SD`: steepest descent. The flip with the most negative energy change is
//!   taken; exact ties are broken uniformly at random or by lowest index.
//! * `SD_RATE`: a downhill flip is taken with probability proportional to the
//!   energy it releases.
//!
//! Flips with zero energy change are never taken, so all three terminate at a
//! configuration where no single flip lowers the energy.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::spin::{
    apply_errors, check_dims, energy_raw, CouplingMatrix, SpinConfig, SpinKey,
};

/// Largest `n` accepted by exhaustive minima enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dynamics {
    #[serde(rename = "MH")]
    MetropolisHastings,
    #[serde(rename = "SD")]
    SteepestDescent,
    #[serde(rename = "SD_RATE")]
    RateDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    Uniform,
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DynamicsKind {
    pub dynamics: Dynamics,
    pub tie_break: TieBreak,
}

impl DynamicsKind {
    pub const MH: DynamicsKind = DynamicsKind {
        dynamics: Dynamics::MetropolisHastings,
        tie_break: TieBreak::Uniform,
    };
    pub const SD: DynamicsKind = DynamicsKind {
        dynamics: Dynamics::SteepestDescent,
        tie_break: TieBreak::Uniform,
    };
    /// Steepest descent with lowest-index tie-break: fully deterministic.
    pub const SD_DETERMINISTIC: DynamicsKind = DynamicsKind {
        dynamics: Dynamics::SteepestDescent,
        tie_break: TieBreak::LowestIndex,
    };
    pub const SD_RATE: DynamicsKind = DynamicsKind {
        dynamics: Dynamics::RateDescent,
        tie_break: TieBreak::Uniform,
    };

    /// True when the trajectory does not depend on the random stream. SD is
    /// deterministic whenever no exact ties occur; this only reports the
    /// configuration-independent guarantee.
    pub fn is_deterministic(&self) -> bool {
        self.dynamics == Dynamics::SteepestDescent && self.tie_break == TieBreak::LowestIndex
    }
}

impl fmt::Display for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dynamics::MetropolisHastings => "MH",
            Dynamics::SteepestDescent => "SD",
            Dynamics::RateDescent => "SD_RATE",
        })
    }
}

impl FromStr for Dynamics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MH" => Ok(Dynamics::MetropolisHastings),
            "SD" => Ok(Dynamics::SteepestDescent),
            "SD_RATE" | "SD-RATE" => Ok(Dynamics::RateDescent),
            other => Err(Error::Parse(format!("unknown dynamics {other:?}"))),
        }
    }
}

impl fmt::Display for DynamicsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tie_break {
            TieBreak::Uniform => write!(f, "{}", self.dynamics),
            TieBreak::LowestIndex => write!(f, "{}/lowest-index", self.dynamics),
        }
    }
}

impl FromStr for DynamicsKind {
    type Err = Error;

    /// `MH`, `SD`, `SD_RATE`, optionally suffixed `/lowest-index`.
    fn from_str(s: &str) -> Result<Self> {
        let (d, tie) = match s.split_once('/') {
            Some((d, "lowest-index")) => (d, TieBreak::LowestIndex),
            Some((_, t)) => return Err(Error::Parse(format!("unknown tie-break {t:?}"))),
            None => (s, TieBreak::Uniform),
        };
        Ok(DynamicsKind {
            dynamics: d.parse()?,
            tie_break: tie,
        })
    }
}

/// How a recall trial is scored against the reference memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scoring {
    /// The final sign pattern must equal the memory.
    #[default]
    Exact,
    /// The global-flip twin of the memory also counts as success.
    TwinTolerant,
}

/// One accepted flip of a relaxation trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub site: usize,
    pub delta: f64,
    pub energy: f64,
}

/// Incremental state for single-flip descent: spins plus local fields
/// `h_i = sum_{j != i} J_ij s_j`, so each energy change costs O(1) and each
/// flip O(n).
pub(crate) struct Descent<'a> {
    j: &'a CouplingMatrix,
    spins: Vec<f64>,
    fields: Vec<f64>,
    energy: f64,
    scratch: Vec<(usize, f64)>,
}

impl<'a> Descent<'a> {
    pub(crate) fn new(j: &'a CouplingMatrix, spins: &[f64]) -> Self {
        let mut d = Descent {
            j,
            spins: spins.to_vec(),
            fields: vec![0.0; spins.len()],
            energy: 0.0,
            scratch: Vec::with_capacity(spins.len()),
        };
        d.refresh();
        d
    }

    pub(crate) fn reset(&mut self, spins: &[f64]) {
        self.spins.copy_from_slice(spins);
        self.refresh();
    }

    fn refresh(&mut self) {
        for i in 0..self.spins.len() {
            self.fields[i] = self.j.field(&self.spins, i);
        }
        self.energy = energy_raw(self.j, &self.spins);
    }

    #[inline]
    pub(crate) fn delta(&self, k: usize) -> f64 {
        2.0 * self.spins[k] * self.fields[k]
    }

    pub(crate) fn spins(&self) -> &[f64] {
        &self.spins
    }

    #[inline]
    pub(crate) fn flip(&mut self, k: usize) {
        self.energy += self.delta(k);
        self.spins[k] = -self.spins[k];
        let twice = 2.0 * self.spins[k];
        let row = self.j.row(k);
        for (i, h) in self.fields.iter_mut().enumerate() {
            if i != k {
                *h += twice * row[i];
            }
        }
    }

    /// Downhill moves as `(site, delta)` with `delta < 0`.
    fn downhill(&mut self) -> &[(usize, f64)] {
        self.scratch.clear();
        for k in 0..self.spins.len() {
            let d = 2.0 * self.spins[k] * self.fields[k];
            if d < 0.0 {
                self.scratch.push((k, d));
            }
        }
        &self.scratch
    }

    /// Picks the next flip, or `None` at a local minimum.
    fn choose(&mut self, kind: DynamicsKind, rng: &mut RandomSource) -> Option<usize> {
        let tie_break = kind.tie_break;
        let moves = self.downhill();
        if moves.is_empty() {
            return None;
        }
        match kind.dynamics {
            Dynamics::MetropolisHastings => Some(moves[rng.random_range(0..moves.len())].0),
            Dynamics::RateDescent => {
                let total: f64 = moves.iter().map(|(_, d)| -d).sum();
                let mut u = rng.random::<f64>() * total;
                for &(k, d) in moves {
                    u += d;
                    if u < 0.0 {
                        return Some(k);
                    }
                }
                moves.last().map(|m| m.0)
            }
            Dynamics::SteepestDescent => {
                let best = moves.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
                match tie_break {
                    TieBreak::LowestIndex => moves.iter().find(|m| m.1 == best).map(|m| m.0),
                    TieBreak::Uniform => {
                        let ties = moves.iter().filter(|m| m.1 == best).count();
                        if ties == 1 {
                            moves.iter().find(|m| m.1 == best).map(|m| m.0)
                        } else {
                            let pick = rng.random_range(0..ties);
                            moves.iter().filter(|m| m.1 == best).nth(pick).map(|m| m.0)
                        }
                    }
                }
            }
        }
    }

    /// Runs to a local minimum. Fields are recomputed from scratch at the end
    /// so accumulated rounding cannot hide a downhill move.
    pub(crate) fn run(
        &mut self,
        kind: DynamicsKind,
        rng: &mut RandomSource,
        mut observer: Option<&mut dyn FnMut(Step)>,
    ) {
        let mut steps = 0usize;
        loop {
            while let Some(k) = self.choose(kind, rng) {
                let delta = self.delta(k);
                self.flip(k);
                if let Some(obs) = observer.as_deref_mut() {
                    obs(Step {
                        index: steps,
                        site: k,
                        delta,
                        energy: self.energy,
                    });
                }
                steps += 1;
            }
            self.refresh();
            if self.downhill().is_empty() {
                break;
            }
        }
    }
}

fn require_binary(s: &SpinConfig) -> Result<()> {
    if !s.is_binary() {
        return Err(Error::Validation("dynamics require a binary configuration".into()));
    }
    Ok(())
}

/// Relaxes `s0` to a local minimum under `kind`.
pub fn relax(
    j: &CouplingMatrix,
    s0: &SpinConfig,
    kind: DynamicsKind,
    rng: &mut RandomSource,
) -> Result<SpinConfig> {
    check_dims(j.n(), s0.len())?;
    require_binary(s0)?;
    let mut d = Descent::new(j, s0.values());
    d.run(kind, rng, None);
    SpinConfig::binary(d.spins().to_vec())
}

/// As [`relax`], also returning every accepted flip.
pub fn relax_with_trajectory(
    j: &CouplingMatrix,
    s0: &SpinConfig,
    kind: DynamicsKind,
    rng: &mut RandomSource,
) -> Result<(SpinConfig, Vec<Step>)> {
    check_dims(j.n(), s0.len())?;
    require_binary(s0)?;
    let mut d = Descent::new(j, s0.values());
    let mut steps = Vec::new();
    let mut push = |s: Step| steps.push(s);
    d.run(kind, rng, Some(&mut push));
    Ok((SpinConfig::binary(d.spins().to_vec())?, steps))
}

/// Trajectory dump: `step,site,delta_e,energy`.
pub fn trajectory_csv(steps: &[Step]) -> String {
    let mut out = String::from("step,site,delta_e,energy\n");
    for s in steps {
        out.push_str(&format!("{},{},{:?},{:?}\n", s.index, s.site, s.delta, s.energy));
    }
    out
}

/// True iff no single flip lowers the energy (zero-change flips allowed).
pub fn is_local_min(j: &CouplingMatrix, s: &SpinConfig) -> Result<bool> {
    check_dims(j.n(), s.len())?;
    require_binary(s)?;
    let v = s.values();
    Ok((0..v.len()).all(|k| v[k] * j.field(v, k) >= 0.0))
}

/// Every binary local minimum, one per `±s` pair, canonicalized so the first
/// spin is `+1`. Sorted by packed sign pattern.
pub fn enumerate_minima(j: &CouplingMatrix) -> Result<Vec<SpinConfig>> {
    let n = j.n();
    Ok(exhaustive_minima_bits(j)?
        .into_iter()
        .map(|bits| SpinConfig::from_bits(n, bits))
        .collect())
}

/// Gray-code walk over the `2^(n-1)` configurations with spin 0 fixed to +1.
/// Bit `i` set means spin `i` is -1.
pub(crate) fn exhaustive_minima_bits(j: &CouplingMatrix) -> Result<Vec<u64>> {
    let n = j.n();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let mut spins = vec![1.0; n];
    let mut fields: Vec<f64> = (0..n).map(|i| j.field(&spins, i)).collect();
    let is_min = |spins: &[f64], fields: &[f64]| (0..n).all(|k| spins[k] * fields[k] >= 0.0);
    let mut minima = Vec::new();
    let mut bits = 0u64;
    if is_min(&spins, &fields) {
        minima.push(bits);
    }
    let total: u64 = 1 << (n - 1);
    for t in 1..total {
        let k = t.trailing_zeros() as usize + 1;
        spins[k] = -spins[k];
        bits ^= 1 << k;
        let twice = 2.0 * spins[k];
        let row = j.row(k);
        for i in 0..n {
            if i != k {
                fields[i] += twice * row[i];
            }
        }
        if t % 4096 == 0 {
            for i in 0..n {
                fields[i] = j.field(&spins, i);
            }
        }
        if is_min(&spins, &fields) {
            // Recheck from scratch so incremental rounding never decides.
            let exact: Vec<f64> = (0..n).map(|i| j.field(&spins, i)).collect();
            if is_min(&spins, &exact) {
                minima.push(bits);
            }
        }
    }
    minima.sort_unstable();
    Ok(minima)
}

/// Distinct canonical minima reached from `starts` uniformly random starts.
pub fn minima_by_restarts(
    j: &CouplingMatrix,
    starts: usize,
    kind: DynamicsKind,
    rng: &mut RandomSource,
) -> Result<Vec<SpinConfig>> {
    let n = j.n();
    let mut seen = std::collections::BTreeSet::new();
    let mut d = Descent::new(j, &vec![1.0; n]);
    for _ in 0..starts {
        let s = SpinConfig::random_binary(n, rng);
        d.reset(s.values());
        d.run(kind, rng, None);
        seen.insert(SpinConfig::binary(d.spins().to_vec())?.canonical().key());
    }
    Ok(seen.into_iter().map(|k| k.to_config()).collect())
}

fn is_success(out: &[f64], memory: &[f64], scoring: Scoring) -> bool {
    let exact = out.iter().zip(memory).all(|(a, b)| a == b);
    match scoring {
        Scoring::Exact => exact,
        Scoring::TwinTolerant => exact || out.iter().zip(memory).all(|(a, b)| *a == -*b),
    }
}

/// Fraction of `trials` recall attempts that return to `memory`: corrupt with
/// `e` random flips, relax under `kind`, compare sign patterns.
pub fn recall_probability(
    j: &CouplingMatrix,
    memory: &SpinConfig,
    e: usize,
    trials: usize,
    kind: DynamicsKind,
    scoring: Scoring,
    rng: &mut RandomSource,
) -> Result<f64> {
    check_dims(j.n(), memory.len())?;
    require_binary(memory)?;
    if e > memory.len() {
        return Err(Error::Validation(format!(
            "cannot apply {e} errors to {} spins",
            memory.len()
        )));
    }
    if trials == 0 {
        return Err(Error::Validation("trials must be >= 1".into()));
    }
    let mut d = Descent::new(j, memory.values());
    let mut ok = 0usize;
    for _ in 0..trials {
        let stim = apply_errors(memory, e, rng)?;
        d.reset(stim.values());
        d.run(kind, rng, None);
        if is_success(d.spins(), memory.values(), scoring) {
            ok += 1;
        }
    }
    Ok(ok as f64 / trials as f64)
}

/// Exact probability that the descent started at `start` ends at `target`
/// (or, with twin-tolerant scoring, at `-target`). Every branch of the
/// stochastic dynamics is followed and weighted by its probability; states
/// are memoized. Returns `None` if more than `max_states` distinct states are
/// visited.
pub fn exact_descent_probability(
    j: &CouplingMatrix,
    start: &SpinConfig,
    target: &SpinConfig,
    kind: DynamicsKind,
    scoring: Scoring,
    max_states: usize,
) -> Result<Option<f64>> {
    check_dims(j.n(), start.len())?;
    check_dims(j.n(), target.len())?;
    require_binary(start)?;
    require_binary(target)?;
    let mut memo: HashMap<SpinKey, f64> = HashMap::new();
    let mut d = Descent::new(j, start.values());
    Ok(descend_exact(&mut d, target.values(), kind, scoring, &mut memo, max_states))
}

fn descend_exact(
    d: &mut Descent<'_>,
    target: &[f64],
    kind: DynamicsKind,
    scoring: Scoring,
    memo: &mut HashMap<SpinKey, f64>,
    max_states: usize,
) -> Option<f64> {
    let key = SpinKey::from_values(d.spins());
    if let Some(&p) = memo.get(&key) {
        return Some(p);
    }
    if memo.len() >= max_states {
        return None;
    }
    let moves: Vec<(usize, f64)> = {
        let n = d.spins.len();
        (0..n)
            .map(|k| (k, d.delta(k)))
            .filter(|m| m.1 < 0.0)
            .collect()
    };
    let branches: Vec<(usize, f64)> = if moves.is_empty() {
        Vec::new()
    } else {
        match kind.dynamics {
            Dynamics::MetropolisHastings => {
                let w = 1.0 / moves.len() as f64;
                moves.iter().map(|&(k, _)| (k, w)).collect()
            }
            Dynamics::RateDescent => {
                let total: f64 = moves.iter().map(|m| -m.1).sum();
                moves.iter().map(|&(k, dk)| (k, -dk / total)).collect()
            }
            Dynamics::SteepestDescent => {
                let best = moves.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
                let ties: Vec<usize> =
                    moves.iter().filter(|m| m.1 == best).map(|m| m.0).collect();
                match kind.tie_break {
                    TieBreak::LowestIndex => vec![(ties[0], 1.0)],
                    TieBreak::Uniform => {
                        let w = 1.0 / ties.len() as f64;
                        ties.into_iter().map(|k| (k, w)).collect()
                    }
                }
            }
        }
    };
    let p = if branches.is_empty() {
        if is_success(d.spins(), target, scoring) {
            1.0
        } else {
            0.0
        }
    } else {
        let mut acc = 0.0;
        for (k, w) in branches {
            d.flip(k);
            let sub = descend_exact(d, target, kind, scoring, memo, max_states);
            d.flip(k);
            acc += w * sub?;
        }
        acc
    };
    memo.insert(key, p);
    Some(p)
}

/// Exact single-flip recall probability: the average over all `n` one-error
/// stimuli of the exact probability of relaxing back to `memory`.
pub fn exact_single_flip_recall(
    j: &CouplingMatrix,
    memory: &SpinConfig,
    kind: DynamicsKind,
    scoring: Scoring,
    max_states: usize,
) -> Result<Option<f64>> {
    check_dims(j.n(), memory.len())?;
    require_binary(memory)?;
    let n = memory.len();
    let mut memo: HashMap<SpinKey, f64> = HashMap::new();
    let mut d = Descent::new(j, memory.values());
    let mut total = 0.0;
    for k in 0..n {
        d.reset(memory.values());
        d.flip(k);
        match descend_exact(&mut d, memory.values(), kind, scoring, &mut memo, max_states) {
            Some(p) => total += p,
            None => return Ok(None),
        }
    }
    Ok(Some(total / n as f64))
}

/// Exact recall probability at `e` errors: the average over all `C(n, e)`
/// stimuli with `e` distinct flipped sites. `None` if the memo grows past
/// `max_states`.
pub fn exact_recall_at(
    j: &CouplingMatrix,
    memory: &SpinConfig,
    e: usize,
    kind: DynamicsKind,
    scoring: Scoring,
    max_states: usize,
) -> Result<Option<f64>> {
    check_dims(j.n(), memory.len())?;
    require_binary(memory)?;
    let n = memory.len();
    if e > n {
        return Err(Error::Validation(format!("cannot apply {e} errors to {n} spins")));
    }
    if n > 63 {
        return Err(Error::TooLarge { n, limit: 63 });
    }
    let mut memo: HashMap<SpinKey, f64> = HashMap::new();
    let mut d = Descent::new(j, memory.values());
    let mut total = 0.0;
    let mut count = 0u64;
    let mut mask: u64 = if e == 0 { 0 } else { (1u64 << e) - 1 };
    let end = 1u64 << n;
    while mask < end {
        d.reset(memory.values());
        for k in 0..n {
            if mask >> k & 1 == 1 {
                d.flip(k);
            }
        }
        match descend_exact(&mut d, memory.values(), kind, scoring, &mut memo, max_states) {
            Some(p) => total += p,
            None => return Ok(None),
        }
        count += 1;
        if mask == 0 {
            break;
        }
        // next integer with the same popcount
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    Ok(Some(total / count as f64))
}
