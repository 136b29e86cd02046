#![allow(dead_code)]

pub mod mode_sum {
    //! Hermite-Gauss mode sum of the cavity Green's function, smoothed over a
    //! Gaussian atomic density by direct quadrature. Independent of the
    //! closed-form kernel.

    use spinmem::cavity::{CavityParams, Point};

    /// Normalised Hermite functions `H_l(√2 x/w0) e^{-x²/w0²} / sqrt(2^l l!)`
    /// by the stable three-term recurrence.
    fn hermite_functions(x: f64, w0: f64, cut: usize, out: &mut [f64]) {
        let u = std::f64::consts::SQRT_2 * x / w0;
        out[0] = (-u * u / 2.0).exp();
        if cut >= 1 {
            out[1] = std::f64::consts::SQRT_2 * u * out[0];
        }
        for l in 2..=cut {
            let lf = l as f64;
            out[l] = (2.0 / lf).sqrt() * u * out[l - 1] - ((lf - 1.0) / lf).sqrt() * out[l - 2];
        }
    }

    /// Overlaps of the 1D Gaussian density centred at `x0` with every mode.
    fn overlaps(x0: f64, p: &CavityParams, cut: usize) -> Vec<f64> {
        let s = p.sigma_a;
        let half = 12.0 * s;
        let steps = 4000;
        let h = 2.0 * half / steps as f64;
        let mut acc = vec![0.0; cut + 1];
        let mut buf = vec![0.0; cut + 1];
        for k in 0..=steps {
            let x = x0 - half + k as f64 * h;
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            let rho = (-(x - x0).powi(2) / (2.0 * s * s)).exp() / (2.0 * std::f64::consts::PI * s * s).sqrt();
            hermite_functions(x, p.w0, cut, &mut buf);
            for l in 0..=cut {
                acc[l] += w * h * rho * buf[l];
            }
        }
        acc
    }

    /// `J(r, r')` from the modes with `l + m ≡ η (mod 7)` and `l + m ≤ cut`.
    pub fn coupling(r: Point, rp: Point, p: &CavityParams, cut: usize) -> f64 {
        let (ax, ay) = (overlaps(r[0], p, cut), overlaps(r[1], p, cut));
        let (bx, by) = (overlaps(rp[0], p, cut), overlaps(rp[1], p, cut));
        let eta = p.eta.rem_euclid(7) as usize;
        let mut sum = 0.0;
        for l in 0..=cut {
            for m in 0..=(cut - l) {
                if (l + m) % 7 == eta {
                    sum += ax[l] * ay[m] * bx[l] * by[m];
                }
            }
        }
        p.prefactor() * sum
    }
}

pub mod props;

pub mod synthetic {
    //! Toy recall backends with known answers.

    use rand::Rng;
    use spinmem::pipeline::NetworkOracle;
    use spinmem::{RandomSource, Result, SpinConfig};

    /// Succeeds iff the stimulus is fewer than `edge` flips from `memory`.
    pub struct StepOracle {
        pub memory: SpinConfig,
        pub edge: usize,
    }

    impl NetworkOracle for StepOracle {
        fn n(&self) -> usize {
            self.memory.len()
        }
        fn recall(&self, s: &SpinConfig, _rng: &mut RandomSource) -> Result<SpinConfig> {
            let d = self.memory.hamming(&s.signs())?;
            Ok(if d < self.edge { self.memory.clone() } else { s.signs() })
        }
        fn label(&self) -> String {
            "step".into()
        }
    }

    /// Returns `memory` with probability `p`, otherwise a fixed decoy.
    pub struct CoinOracle {
        pub memory: SpinConfig,
        pub decoy: SpinConfig,
        pub p: f64,
    }

    impl NetworkOracle for CoinOracle {
        fn n(&self) -> usize {
            self.memory.len()
        }
        fn recall(&self, _s: &SpinConfig, rng: &mut RandomSource) -> Result<SpinConfig> {
            Ok(if rng.random::<f64>() < self.p { self.memory.clone() } else { self.decoy.clone() })
        }
        fn label(&self) -> String {
            "coin".into()
        }
    }

    /// Stimuli within `radius` flips of a memory (or its twin) return it;
    /// anything else lands on a uniformly chosen memory.
    pub struct PoolOracle {
        pub memories: Vec<SpinConfig>,
        pub radius: usize,
    }

    impl NetworkOracle for PoolOracle {
        fn n(&self) -> usize {
            self.memories[0].len()
        }
        fn recall(&self, s: &SpinConfig, rng: &mut RandomSource) -> Result<SpinConfig> {
            let s = s.signs();
            let n = s.len();
            for m in &self.memories {
                let h = m.hamming(&s)?;
                if h.min(n - h) <= self.radius {
                    return Ok(m.clone());
                }
            }
            Ok(self.memories[rng.random_range(0..self.memories.len())].clone())
        }
        fn label(&self) -> String {
            "pool".into()
        }
    }

    /// `k` binary patterns pairwise at least `min_hamming` apart (and from
    /// each other's twins).
    pub fn spread_patterns(n: usize, k: usize, min_hamming: usize, rng: &mut RandomSource) -> Vec<SpinConfig> {
        let mut out: Vec<SpinConfig> = Vec::new();
        while out.len() < k {
            let c = SpinConfig::random_binary(n, rng);
            let ok = out.iter().all(|o| {
                let h = o.hamming(&c).unwrap();
                h.min(n - h) >= min_hamming
            });
            if ok {
                out.push(c);
            }
        }
        out
    }
}
