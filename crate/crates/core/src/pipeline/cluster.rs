//! Agglomerative clustering of sampled configurations on overlap distance.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{overlap_distance_unchecked, SpinConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

/// A merge of two tree nodes. Node ids below `leaves.len()` are leaves,
/// merge `k` has id `leaves.len() + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Binary merge tree. Each leaf groups sample indices whose configurations
/// are bitwise identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTree {
    pub linkage: Linkage,
    pub leaves: Vec<Vec<usize>>,
    pub merges: Vec<Merge>,
}

impl ClusterTree {
    /// Builds the tree. Configurations are normalized first, so binary and
    /// real-amplitude inputs may be mixed.
    pub fn build(configs: &[SpinConfig], linkage: Linkage) -> Result<Self> {
        let first = configs
            .first()
            .ok_or_else(|| Error::Validation("cannot cluster an empty list".into()))?;
        let n = first.len();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut leaves: Vec<Vec<usize>> = Vec::new();
        let mut units: Vec<Vec<f64>> = Vec::new();
        for (i, c) in configs.iter().enumerate() {
            if c.len() != n {
                return Err(Error::Dimension { expected: n, actual: c.len() });
            }
            let u = c.unit()?.into_values();
            let key: Vec<u64> = u.iter().map(|v| v.to_bits()).collect();
            match index.get(&key) {
                Some(&l) => leaves[l].push(i),
                None => {
                    index.insert(key, leaves.len());
                    leaves.push(vec![i]);
                    units.push(u);
                }
            }
        }
        let l = leaves.len();
        let mut dist = vec![0.0; l * l];
        for a in 0..l {
            for b in a + 1..l {
                let d = overlap_distance_unchecked(&units[a], &units[b]);
                dist[a * l + b] = d;
                dist[b * l + a] = d;
            }
        }
        let mut size: Vec<usize> = leaves.iter().map(Vec::len).collect();
        let mut node: Vec<usize> = (0..l).collect();
        let mut active = vec![true; l];
        let mut nn = vec![usize::MAX; l];
        let mut nnd = vec![f64::INFINITY; l];
        let nearest = |dist: &[f64], active: &[bool], a: usize| -> (usize, f64) {
            let mut best = (usize::MAX, f64::INFINITY);
            for b in 0..l {
                if b != a && active[b] && dist[a * l + b] < best.1 {
                    best = (b, dist[a * l + b]);
                }
            }
            best
        };
        for a in 0..l {
            (nn[a], nnd[a]) = nearest(&dist, &active, a);
        }
        let mut merges = Vec::with_capacity(l.saturating_sub(1));
        for _ in 1..l {
            let mut a = usize::MAX;
            for i in 0..l {
                if active[i] && (a == usize::MAX || nnd[i] < nnd[a]) {
                    a = i;
                }
            }
            let b = nn[a];
            let (a, b) = (a.min(b), a.max(b));
            let h = dist[a * l + b];
            merges.push(Merge {
                left: node[a],
                right: node[b],
                height: h,
                size: size[a] + size[b],
            });
            active[b] = false;
            let (sa, sb) = (size[a] as f64, size[b] as f64);
            for k in 0..l {
                if !active[k] || k == a {
                    continue;
                }
                let (da, db) = (dist[a * l + k], dist[b * l + k]);
                let d = match linkage {
                    Linkage::Average => (sa * da + sb * db) / (sa + sb),
                    Linkage::Single => da.min(db),
                    Linkage::Complete => da.max(db),
                };
                dist[a * l + k] = d;
                dist[k * l + a] = d;
            }
            size[a] += size[b];
            node[a] = l + merges.len() - 1;
            (nn[a], nnd[a]) = nearest(&dist, &active, a);
            for k in 0..l {
                if !active[k] || k == a {
                    continue;
                }
                if nn[k] == a || nn[k] == b {
                    (nn[k], nnd[k]) = nearest(&dist, &active, k);
                } else if dist[k * l + a] < nnd[k] || (dist[k * l + a] == nnd[k] && a < nn[k]) {
                    nn[k] = a;
                    nnd[k] = dist[k * l + a];
                }
            }
        }
        Ok(Self { linkage, leaves, merges })
    }

    pub fn root(&self) -> usize {
        self.leaves.len() + self.merges.len() - 1
    }

    pub fn height(&self, node: usize) -> f64 {
        if node < self.leaves.len() {
            0.0
        } else {
            self.merges[node - self.leaves.len()].height
        }
    }

    /// Sample indices under `node`, ascending.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.leaves.len() {
                out.extend_from_slice(&self.leaves[x]);
            } else {
                let m = self.merges[x - self.leaves.len()];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out.sort_unstable();
        out
    }

    /// Subtrees of `node` whose merge height is strictly below `cut`, as
    /// node ids, walking down from `node`.
    pub fn cut_nodes(&self, node: usize, cut: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.leaves.len() || self.height(x) < cut {
                out.push(x);
            } else {
                let m = self.merges[x - self.leaves.len()];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        out
    }

    /// Flat clusters after cutting the whole tree at `cut`, ordered by their
    /// smallest sample index.
    pub fn cut(&self, cut: f64) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .cut_nodes(self.root(), cut)
            .into_iter()
            .map(|x| self.members(x))
            .collect();
        out.sort_by_key(|c| c[0]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;

    fn cfg(v: &[f64]) -> SpinConfig {
        SpinConfig::new(v.to_vec()).unwrap()
    }

    fn naive(configs: &[SpinConfig], linkage: Linkage) -> Vec<f64> {
        // O(N^3) reference over singleton clusters
        let units: Vec<Vec<f64>> = configs.iter().map(|c| c.unit().unwrap().into_values()).collect();
        let mut clusters: Vec<Vec<usize>> = (0..configs.len()).map(|i| vec![i]).collect();
        let d = |a: &[usize], b: &[usize]| {
            let ds: Vec<f64> = a
                .iter()
                .flat_map(|&i| b.iter().map(move |&j| (i, j)))
                .map(|(i, j)| overlap_distance_unchecked(&units[i], &units[j]))
                .collect();
            match linkage {
                Linkage::Average => ds.iter().sum::<f64>() / ds.len() as f64,
                Linkage::Single => ds.iter().cloned().fold(f64::INFINITY, f64::min),
                Linkage::Complete => ds.iter().cloned().fold(0.0, f64::max),
            }
        };
        let mut heights = Vec::new();
        while clusters.len() > 1 {
            let mut best = (0, 1, f64::INFINITY);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let x = d(&clusters[a], &clusters[b]);
                    if x < best.2 {
                        best = (a, b, x);
                    }
                }
            }
            let merged = clusters.remove(best.1);
            clusters[best.0].extend(merged);
            heights.push(best.2);
        }
        heights
    }

    #[test]
    fn identical_configs_form_one_leaf() {
        let c = vec![cfg(&[1.0, -1.0, 1.0]); 5];
        let t = ClusterTree::build(&c, Linkage::Average).unwrap();
        assert_eq!(t.leaves.len(), 1);
        assert_eq!(t.cut(1.0), vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn twins_are_at_distance_zero() {
        let a = cfg(&[1.0, -1.0, 1.0, 1.0]);
        let t = ClusterTree::build(&[a.clone(), a.negated()], Linkage::Average).unwrap();
        assert_eq!(t.merges[0].height, 0.0);
        assert_eq!(t.cut(0.21).len(), 1);
    }

    #[test]
    fn heights_match_naive_reference() {
        let mut rng = RandomSource::new(3);
        for linkage in [Linkage::Average, Linkage::Single, Linkage::Complete] {
            let configs: Vec<SpinConfig> = (0..30)
                .map(|_| {
                    let v: Vec<f64> = (0..8)
                        .map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0))
                        .collect();
                    SpinConfig::new(v).unwrap()
                })
                .collect();
            let t = ClusterTree::build(&configs, linkage).unwrap();
            let mut got: Vec<f64> = t.merges.iter().map(|m| m.height).collect();
            let mut want = naive(&configs, linkage);
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{linkage:?}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn members_partition_samples() {
        let mut rng = RandomSource::new(9);
        let configs: Vec<SpinConfig> = (0..40).map(|_| SpinConfig::random_binary(6, &mut rng)).collect();
        let t = ClusterTree::build(&configs, Linkage::Average).unwrap();
        for cut in [0.0, 0.5, 1.0, 2.0, 10.0] {
            let mut all: Vec<usize> = t.cut(cut).concat();
            all.sort_unstable();
            assert_eq!(all, (0..40).collect::<Vec<_>>());
        }
        assert_eq!(t.members(t.root()).len(), 40);
    }
}
