//! Spin configurations, coupling matrices and the energy primitives shared by
//! every other module.
//!
//! Energy convention throughout the crate: `E = -1/2 * sum_{i != j} J_ij s_i s_j`.
//! Diagonal couplings are stored but never enter binary-spin energies.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Tolerance used when validating that a configuration is normalized.
pub const NORM_TOL: f64 = 1e-6;

/// A configuration of `n` spin components, either binary (`±1`) or real
/// amplitudes such as measured `<S^x>` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpinConfig {
    values: Vec<f64>,
}

impl SpinConfig {
    /// Real-amplitude configuration; entries must be finite and `n >= 1`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("spin configuration must have n >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite spin value at site {i}")));
        }
        Ok(Self { values })
    }

    /// Binary configuration; every entry must be exactly `+1` or `-1`.
    pub fn binary(values: Vec<f64>) -> Result<Self> {
        let s = Self::new(values)?;
        if !s.is_binary() {
            return Err(Error::Validation("binary configuration must contain only +1/-1".into()));
        }
        Ok(s)
    }

    /// Normalized configuration with `sum v^2 = 1` within [`NORM_TOL`].
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let s = Self::new(values)?;
        if !s.is_normalized(NORM_TOL) {
            return Err(Error::Validation(format!(
                "configuration not normalized: sum of squares = {}",
                s.norm_sq()
            )));
        }
        Ok(s)
    }

    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        Self::binary(signs.iter().map(|&s| f64::from(s)).collect())
    }

    pub fn all_up(n: usize) -> Self {
        Self { values: vec![1.0; n.max(1)] }
    }

    /// Uniformly random binary configuration.
    pub fn random_binary(n: usize, rng: &mut RandomSource) -> Self {
        let values = (0..n.max(1))
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Self { values }
    }

    /// Binary configuration whose bit `i` of `bits` set means spin `i` is `-1`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        let values = (0..n)
            .map(|i| if (bits >> i) & 1 == 1 { -1.0 } else { 1.0 })
            .collect();
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0 || v == -1.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sq() - 1.0).abs() <= tol
    }

    /// Sign pattern of the configuration; exact zeros map to `+1`.
    pub fn signs(&self) -> SpinConfig {
        let values = self
            .values
            .iter()
            .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
            .collect();
        SpinConfig { values }
    }

    /// `s / |s|`. Binary configurations become the uniform-amplitude `±1/sqrt(n)` form.
    pub fn unit(&self) -> Result<SpinConfig> {
        let norm = self.norm_sq().sqrt();
        if norm == 0.0 {
            return Err(Error::Validation("cannot normalize the zero configuration".into()));
        }
        Ok(SpinConfig {
            values: self.values.iter().map(|v| v / norm).collect(),
        })
    }

    pub fn flipped(&self, k: usize) -> Result<SpinConfig> {
        check_index(k, self.len())?;
        let mut out = self.clone();
        out.values[k] = -out.values[k];
        Ok(out)
    }

    pub fn negated(&self) -> SpinConfig {
        SpinConfig {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Global-flip representative whose first nonzero entry is positive.
    pub fn canonical(&self) -> SpinConfig {
        match self.values.iter().find(|&&v| v != 0.0) {
            Some(&v) if v < 0.0 => self.negated(),
            _ => self.clone(),
        }
    }

    /// Number of sites whose signs differ.
    pub fn hamming(&self, other: &SpinConfig) -> Result<usize> {
        check_dims(self.len(), other.len())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| (**a < 0.0) != (**b < 0.0))
            .count())
    }

    /// Packed sign pattern usable as a hash key.
    pub fn key(&self) -> SpinKey {
        SpinKey::from_values(&self.values)
    }

    /// One line of comma-separated signed values.
    pub fn to_csv_line(&self) -> String {
        self.values
            .iter()
            .map(|v| format_value(*v))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl FromStr for SpinConfig {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let values = line
            .trim()
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad spin value {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        SpinConfig::new(values)
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv_line())
    }
}

fn format_value(v: f64) -> String {
    if v == 1.0 {
        "+1".to_string()
    } else if v == -1.0 {
        "-1".to_string()
    } else {
        // `{:?}` prints the shortest representation that round-trips exactly.
        format!("{v:?}")
    }
}

/// Packed sign pattern (bit set = negative spin). Cheap to hash and compare.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinKey {
    n: usize,
    words: Vec<u64>,
}

impl SpinKey {
    pub fn from_values(values: &[f64]) -> Self {
        let mut words = vec![0u64; values.len().div_ceil(64)];
        for (i, &v) in values.iter().enumerate() {
            if v < 0.0 {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Self {
            n: values.len(),
            words,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn to_config(&self) -> SpinConfig {
        let values = (0..self.n)
            .map(|i| if (self.words[i / 64] >> (i % 64)) & 1 == 1 { -1.0 } else { 1.0 })
            .collect();
        SpinConfig { values }
    }
}

/// Symmetric `n x n` real coupling matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<f64>,
    diagonal_zeroed: bool,
}

impl CouplingMatrix {
    /// Validates exact symmetry and finiteness.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("coupling matrix must have n >= 1".into()));
        }
        if entries.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                actual: entries.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if !v.is_finite() {
                    return Err(Error::Validation(format!("non-finite coupling at ({i}, {j})")));
                }
                if j > i && v != entries[j * n + i] {
                    return Err(Error::Validation(format!("coupling not symmetric at ({i}, {j})")));
                }
            }
        }
        let diagonal_zeroed = (0..n).all(|i| entries[i * n + i] == 0.0);
        Ok(Self {
            n,
            entries,
            diagonal_zeroed,
        })
    }

    /// Builds the matrix from `f(i, j)` evaluated for `i <= j` and mirrored.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diagonal_zeroed(&self) -> bool {
        self.diagonal_zeroed
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Copy with the diagonal set to zero.
    pub fn without_diagonal(&self) -> CouplingMatrix {
        let mut entries = self.entries.clone();
        for i in 0..self.n {
            entries[i * self.n + i] = 0.0;
        }
        CouplingMatrix {
            n: self.n,
            entries,
            diagonal_zeroed: true,
        }
    }

    pub fn scaled(&self, c: f64) -> Result<CouplingMatrix> {
        CouplingMatrix::new(self.n, self.entries.iter().map(|v| v * c).collect())
    }

    /// Local field `sum_{j != i} J_ij s_j`.
    #[inline]
    pub fn field(&self, s: &[f64], i: usize) -> f64 {
        let row = self.row(i);
        let mut h = 0.0;
        for (j, (&jij, &sj)) in row.iter().zip(s).enumerate() {
            if j != i {
                h += jij * sj;
            }
        }
        h
    }

    /// Largest eigenvalue by cyclic Jacobi rotation (matrices here are small).
    pub fn max_eigenvalue(&self) -> f64 {
        *symmetric_eigenvalues(self.n, &self.entries)
            .last()
            .expect("n >= 1")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let line = self
                .row(i)
                .iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|tok| {
                        tok.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Parse(format!("bad matrix entry {tok:?}: {e}")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                actual: bad.len(),
            });
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }

    /// Binary container: magic `SPJM`, format version `u32` LE, `n` as `u64` LE,
    /// then `n*n` IEEE-754 `f64` LE values row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&MATRIX_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.entries {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MATRIX_MAGIC {
            return Err(Error::Parse("not a coupling-matrix container".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != MATRIX_VERSION {
            return Err(Error::Parse(format!("unsupported container version {version}")));
        }
        let mut dword = [0u8; 8];
        r.read_exact(&mut dword)?;
        let n = u64::from_le_bytes(dword) as usize;
        let mut entries = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut dword)?;
            entries.push(f64::from_le_bytes(dword));
        }
        Self::new(n, entries)
    }
}

const MATRIX_MAGIC: &[u8; 4] = b"SPJM";
const MATRIX_VERSION: u32 = 1;

/// Eigenvalues of a small dense symmetric matrix, ascending.
pub(crate) fn symmetric_eigenvalues(n: usize, entries: &[f64]) -> Vec<f64> {
    let mut a = entries.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

#[inline]
pub(crate) fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension { expected, actual });
    }
    Ok(())
}

#[inline]
pub(crate) fn check_index(index: usize, size: usize) -> Result<()> {
    if index >= size {
        return Err(Error::Index { index, size });
    }
    Ok(())
}

/// `E = -1/2 * sum_{i != j} J_ij s_i s_j`.
pub fn ising_energy(j: &CouplingMatrix, s: &SpinConfig) -> Result<f64> {
    check_dims(j.n(), s.len())?;
    Ok(energy_raw(j, s.values()))
}

#[inline]
pub(crate) fn energy_raw(j: &CouplingMatrix, s: &[f64]) -> f64 {
    let n = j.n();
    let mut e = 0.0;
    for i in 0..n {
        let row = j.row(i);
        let mut acc = 0.0;
        for k in (i + 1)..n {
            acc += row[k] * s[k];
        }
        e -= s[i] * acc;
    }
    e
}

/// Energy change from flipping site `k`: `2 s_k sum_{j != k} J_kj s_j`.
pub fn delta_energy(j: &CouplingMatrix, s: &SpinConfig, k: usize) -> Result<f64> {
    check_dims(j.n(), s.len())?;
    check_index(k, s.len())?;
    Ok(2.0 * s.values()[k] * j.field(s.values(), k))
}

/// `d = (n/2) (1 - |<a, b>|)`, the Hamming distance for uniform-amplitude
/// configurations. Both inputs must be normalized.
pub fn overlap_distance(a: &SpinConfig, b: &SpinConfig) -> Result<f64> {
    check_dims(a.len(), b.len())?;
    for (name, c) in [("first", a), ("second", b)] {
        if !c.is_normalized(NORM_TOL) {
            return Err(Error::Validation(format!(
                "{name} configuration not normalized (sum of squares {})",
                c.norm_sq()
            )));
        }
    }
    Ok(overlap_distance_unchecked(a.values(), b.values()))
}

#[inline]
pub(crate) fn overlap_distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let d = 0.5 * a.len() as f64 * (1.0 - dot.abs());
    d.max(0.0)
}

/// Flips `e` distinct, uniformly chosen sites of a binary configuration.
pub fn apply_errors(s: &SpinConfig, e: usize, rng: &mut RandomSource) -> Result<SpinConfig> {
    let n = s.len();
    if e > n {
        return Err(Error::Validation(format!("cannot apply {e} errors to {n} spins")));
    }
    if !s.is_binary() {
        return Err(Error::Validation("apply_errors requires a binary configuration".into()));
    }
    let sites = error_sites(n, e, rng);
    apply_errors_at(s, &sites)
}

/// The `e` distinct sites `apply_errors` would flip for the same stream state.
pub fn error_sites(n: usize, e: usize, rng: &mut RandomSource) -> Vec<usize> {
    index::sample(rng, n, e.min(n)).into_vec()
}

pub fn apply_errors_at(s: &SpinConfig, sites: &[usize]) -> Result<SpinConfig> {
    let mut out = s.clone();
    for &k in sites {
        check_index(k, s.len())?;
        out.values[k] = -out.values[k];
    }
    Ok(out)
}
