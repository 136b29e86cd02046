use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cavity::{CavityParams, KernelTable, Point, SitePlan};
use crate::error::{Error, Result};
use crate::ode::Tolerance;
use crate::spin::{symmetric_eigenvalues, SpinConfig};

/// Spin length of each site.
pub const SPIN: f64 = 0.5;

/// Which eigenvalue defines the superradiant threshold `g_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdConvention {
    /// Largest eigenvalue of the full trap-centre coupling matrix.
    FullMatrix,
    /// Largest eigenvalue with the self-couplings removed.
    #[default]
    OffDiagonal,
}

/// Elastic response of the ensembles to optical forces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum Elasticity {
    /// Positions pinned to the trap centres.
    Disabled,
    /// Harmonic traps of energy scale `e_trap` (rad/ms per site spin).
    Trap { e_trap: f64 },
}

impl Elasticity {
    pub fn e_trap(&self) -> Option<f64> {
        match *self {
            Elasticity::Disabled => None,
            Elasticity::Trap { e_trap } => Some(e_trap),
        }
    }

    /// Trap energy multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Elasticity::Disabled => Elasticity::Disabled,
            Elasticity::Trap { e_trap } => Elasticity::Trap { e_trap: e_trap * factor },
        }
    }
}

/// Units: ħ = 1, time in ms, frequencies in rad/ms, lengths in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub omega_z: f64,
    /// `g / g_c` at the end of the ramp.
    pub pump_ratio_final: f64,
    /// Time constant of the exponential pump ramp.
    pub pump_tau: f64,
    pub t_end: f64,
    /// Peak stimulus strength in units of `omega_z`.
    pub stimulus_amplitude: f64,
    /// Stimulus ramp: cosine up over `[0, t1]`, hold to `t2`, cosine down to `t3`.
    pub stimulus_ramp: [f64; 3],
    /// Inverse damping coefficient `ħ / c_d` (µm²).
    pub mobility: f64,
    /// Atoms per ensemble; optical forces scale with it.
    pub atoms_per_site: f64,
    pub elasticity: Elasticity,
    /// Trap waist (µm).
    pub w_t: f64,
    /// Symmetry-breaking `Sx` seed in units of the spin length.
    pub seed_amplitude: f64,
    pub threshold: ThresholdConvention,
    pub tolerance: Tolerance,
    /// Reuse the coupling geometry until some site moves this far (µm),
    /// correcting to first order in the displacement meanwhile.
    pub lazy_threshold: Option<f64>,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            omega_z: 2.0 * PI * 7.5,
            pump_ratio_final: 4.0,
            pump_tau: 2.0,
            t_end: 8.0,
            stimulus_amplitude: 0.5,
            stimulus_ramp: [1.6, 5.0, 7.0],
            mobility: 0.002,
            atoms_per_site: 4.2e4,
            elasticity: Elasticity::Trap { e_trap: DEFAULT_E_TRAP },
            w_t: 20.0,
            seed_amplitude: 1e-4,
            threshold: ThresholdConvention::default(),
            tolerance: Tolerance::new(1e-8, 1e-10),
            lazy_threshold: None,
        }
    }
}

/// Calibrated trap energy for the J1 plan at default settings.
pub const DEFAULT_E_TRAP: f64 = 2420.0;

impl SimParams {
    /// Settings for bulk capacity runs: looser tolerance and first-order
    /// lazy geometry. Sign outcomes match the default settings.
    pub fn fast() -> Self {
        Self {
            tolerance: Tolerance::new(1e-6, 1e-8),
            lazy_threshold: Some(0.05),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_z", self.omega_z),
            ("pump_tau", self.pump_tau),
            ("t_end", self.t_end),
            ("mobility", self.mobility),
            ("atoms_per_site", self.atoms_per_site),
            ("w_t", self.w_t),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("pump_ratio_final", self.pump_ratio_final),
            ("stimulus_amplitude", self.stimulus_amplitude),
            ("seed_amplitude", self.seed_amplitude),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        let [a, b, c] = self.stimulus_ramp;
        if !(0.0 < a && a <= b && b <= c && c <= self.t_end) {
            return Err(Error::Validation(format!(
                "stimulus ramp times must satisfy 0 < t1 <= t2 <= t3 <= t_end, got {:?}",
                self.stimulus_ramp
            )));
        }
        if let Elasticity::Trap { e_trap } = self.elasticity {
            if !(e_trap > 0.0 && e_trap.is_finite()) {
                return Err(Error::Validation(format!("e_trap must be positive, got {e_trap}")));
            }
        }
        if let Some(d) = self.lazy_threshold {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Validation(format!("lazy threshold must be positive, got {d}")));
            }
        }
        if !(self.tolerance.rtol > 0.0 && self.tolerance.atol > 0.0) {
            return Err(Error::Validation("integrator tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Pump ratio `g(t)/g_c`: exponential ramp from 0 to the final ratio.
    pub fn pump_ratio(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.t_end);
        self.pump_ratio_final * (t / self.pump_tau).exp_m1() / (self.t_end / self.pump_tau).exp_m1()
    }

    /// Stimulus envelope in `[0, 1]`.
    pub fn stimulus_envelope(&self, t: f64) -> f64 {
        let [a, b, c] = self.stimulus_ramp;
        if t <= 0.0 || t >= c {
            0.0
        } else if t < a {
            0.5 * (1.0 - (PI * t / a).cos())
        } else if t <= b {
            1.0
        } else {
            0.5 * (1.0 + (PI * (t - b) / (c - b)).cos())
        }
    }

    /// Times at which the schedules have kinks.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![0.0];
        for &t in &self.stimulus_ramp {
            if t > *v.last().unwrap() && t < self.t_end {
                v.push(t);
            }
        }
        v.push(self.t_end);
        v
    }

    /// Position velocity per unit energy gradient.
    pub fn drift_rate(&self) -> f64 {
        self.mobility * self.atoms_per_site
    }
}

/// Per-term energies in rad/ms (ħ = 1).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub transverse: f64,
    pub ising: f64,
    pub stimulus: f64,
    pub trap: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.transverse + self.ising + self.stimulus + self.trap
    }

    /// Every term divided by `omega_z * S`.
    pub fn per_spin_length(&self, omega_z: f64) -> EnergyTerms {
        let s = omega_z * SPIN;
        EnergyTerms {
            transverse: self.transverse / s,
            ising: self.ising / s,
            stimulus: self.stimulus / s,
            trap: self.trap / s,
        }
    }
}

/// Spins and positions of every site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
    pub positions: Vec<Point>,
}

impl NetworkState {
    /// Every spin at `Sz = -S`, positions at the given centres.
    pub fn normal(centres: &[Point]) -> Self {
        let n = centres.len();
        Self {
            sx: vec![0.0; n],
            sy: vec![0.0; n],
            sz: vec![-SPIN; n],
            positions: centres.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.sx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sx.is_empty()
    }

    /// Flat layout `[Sx.., Sy.., Sz.., x.., y..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(5 * self.len());
        v.extend_from_slice(&self.sx);
        v.extend_from_slice(&self.sy);
        v.extend_from_slice(&self.sz);
        v.extend(self.positions.iter().map(|p| p[0]));
        v.extend(self.positions.iter().map(|p| p[1]));
        v
    }

    pub fn from_slice(y: &[f64]) -> Result<Self> {
        if y.len() % 5 != 0 {
            return Err(Error::Validation(format!("state length {} is not 5n", y.len())));
        }
        let n = y.len() / 5;
        Ok(Self {
            sx: y[..n].to_vec(),
            sy: y[n..2 * n].to_vec(),
            sz: y[2 * n..3 * n].to_vec(),
            positions: (0..n).map(|i| [y[3 * n + i], y[4 * n + i]]).collect(),
        })
    }

    /// Largest deviation of `|S_i|` from the spin length.
    pub fn spin_length_error(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let l = (self.sx[i].powi(2) + self.sy[i].powi(2) + self.sz[i].powi(2)).sqrt();
                (l - SPIN).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn signs(&self) -> SpinConfig {
        SpinConfig::binary(self.sx.iter().map(|&x| if x >= 0.0 { 1.0 } else { -1.0 }).collect())
            .expect("signs are binary")
    }
}

/// One network: the coupling kernel, beam targets and the resolved threshold.
#[derive(Debug, Clone)]
pub struct Network {
    pub plan: SitePlan,
    pub cavity: CavityParams,
    pub params: SimParams,
    pub(crate) table: KernelTable,
    /// Threshold pump strength (rad/ms).
    pub g_c: f64,
    /// Stimulus coefficient per unit sign so that the mean site field is
    /// `stimulus_amplitude * omega_z`.
    pub stimulus_scale: f64,
}

impl Network {
    pub fn new(plan: SitePlan, cavity: CavityParams, params: SimParams) -> Result<Self> {
        params.validate()?;
        let table = KernelTable::new(&cavity)?;
        let n = plan.len();
        let sites = plan.sites();
        let mut j = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                j[a * n + b] = table.value(sites[a], sites[b]);
            }
        }
        let mean_diag = (0..n).map(|a| j[a * n + a]).sum::<f64>() / n as f64;
        if params.threshold == ThresholdConvention::OffDiagonal {
            for a in 0..n {
                j[a * n + a] = 0.0;
            }
        }
        let lambda = symmetric_eigenvalues(n, &j)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!(
                "coupling matrix has no positive eigenvalue (max {lambda}); no superradiant threshold"
            )));
        }
        Ok(Self {
            g_c: params.omega_z / (2.0 * SPIN * lambda),
            stimulus_scale: params.stimulus_amplitude * params.omega_z / mean_diag,
            plan,
            cavity,
            params,
            table,
        })
    }

    pub fn n(&self) -> usize {
        self.plan.len()
    }
}

/// Per-trial quantities fixed for the whole evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDrive {
    /// Trap centres (possibly jittered).
    pub centres: Vec<Point>,
    /// Stimulus coefficient for each beam, sign included.
    pub beam_weights: Vec<f64>,
}

impl TrialDrive {
    /// Noise-free drive stimulating `signs`.
    pub fn clean(network: &Network, signs: &SpinConfig) -> Result<Self> {
        if signs.len() != network.n() {
            return Err(Error::Dimension {
                expected: network.n(),
                actual: signs.len(),
            });
        }
        Ok(Self {
            centres: network.plan.sites().to_vec(),
            beam_weights: signs.values().iter().map(|s| s * network.stimulus_scale).collect(),
        })
    }
}

/// Evaluates energies and the equations of motion.
pub struct Model<'a> {
    pub network: &'a Network,
    pub drive: &'a TrialDrive,
    j: Vec<f64>,
    dj: Vec<Point>,
    field: Vec<f64>,
    dfield: Vec<Point>,
    base_field: Vec<f64>,
    base_dfield: Vec<Point>,
    /// Geometry at the reference positions.
    j0: Vec<f64>,
    field0: Vec<f64>,
    reference: Vec<Point>,
    with_stimulus: bool,
    /// Positions never move without elasticity, so the geometry is cached.
    pinned: bool,
    cached: bool,
    pub refreshes: usize,
}

impl<'a> Model<'a> {
    pub fn new(network: &'a Network, drive: &'a TrialDrive) -> Self {
        let n = network.n();
        Self {
            network,
            drive,
            j: vec![0.0; n * n],
            dj: vec![[0.0; 2]; n * n],
            field: vec![0.0; n],
            dfield: vec![[0.0; 2]; n],
            base_field: vec![0.0; n],
            base_dfield: vec![[0.0; 2]; n],
            j0: vec![0.0; n * n],
            field0: vec![0.0; n],
            reference: vec![[0.0; 2]; n],
            with_stimulus: false,
            pinned: network.params.elasticity == Elasticity::Disabled,
            cached: false,
            refreshes: 0,
        }
    }

    fn n(&self) -> usize {
        self.network.n()
    }

    /// Fills `J(r_i, r_j)`, `∂₁J(r_i, r_j)`, `f(r_i)` and `∇f(r_i)`.
    fn refresh(&mut self, t: f64, pos: impl Fn(usize) -> Point) {
        let n = self.n();
        let p = &self.network.params;
        let env = p.stimulus_envelope(t);
        let live = t < p.stimulus_ramp[2];
        if self.pinned {
            if !self.cached {
                self.geometry(&pos, true);
                self.cached = true;
            }
        } else if let Some(limit) = p.lazy_threshold {
            let moved = (0..n)
                .map(|i| {
                    let (r, q) = (pos(i), self.reference[i]);
                    (r[0] - q[0]).hypot(r[1] - q[1])
                })
                .fold(0.0, f64::max);
            if !self.cached || moved > limit || (live && !self.with_stimulus) {
                self.geometry(&pos, live);
                self.cached = true;
            } else {
                self.taylor(&pos);
            }
        } else {
            self.geometry(&pos, live);
        }
        for i in 0..n {
            self.field[i] = env * self.base_field[i];
            let d = self.base_dfield[i];
            self.dfield[i] = [env * d[0], env * d[1]];
        }
    }

    /// First-order update of `J` and `f` from the reference geometry.
    fn taylor(&mut self, pos: &impl Fn(usize) -> Point) {
        let n = self.n();
        let delta: Vec<Point> = (0..n)
            .map(|i| {
                let (r, q) = (pos(i), self.reference[i]);
                [r[0] - q[0], r[1] - q[1]]
            })
            .collect();
        for i in 0..n {
            for k in 0..n {
                let (a, b) = (self.dj[i * n + k], self.dj[k * n + i]);
                self.j[i * n + k] = self.j0[i * n + k]
                    + a[0] * delta[i][0]
                    + a[1] * delta[i][1]
                    + b[0] * delta[k][0]
                    + b[1] * delta[k][1];
            }
            let d = self.base_dfield[i];
            self.base_field[i] = self.field0[i] + d[0] * delta[i][0] + d[1] * delta[i][1];
        }
    }

    fn geometry(&mut self, pos: &impl Fn(usize) -> Point, stimulus: bool) {
        let n = self.n();
        self.refreshes += 1;
        self.with_stimulus = stimulus;
        for i in 0..n {
            self.reference[i] = pos(i);
        }
        let table = &self.network.table;
        for i in 0..n {
            let ri = pos(i);
            for k in i..n {
                let (v, gi, gk) = table.with_grad(ri, pos(k));
                self.j[i * n + k] = v;
                self.j[k * n + i] = v;
                self.dj[i * n + k] = gi;
                self.dj[k * n + i] = gk;
            }
        }
        let beams = self.network.plan.sites();
        for i in 0..n {
            let (mut f, mut df) = (0.0, [0.0; 2]);
            let ri = pos(i);
            for (k, &w) in self.drive.beam_weights.iter().enumerate() {
                if !stimulus || w == 0.0 {
                    continue;
                }
                let (v, g, _) = table.with_grad(ri, beams[k]);
                f += w * v;
                df[0] += w * g[0];
                df[1] += w * g[1];
            }
            self.base_field[i] = f;
            self.base_dfield[i] = df;
        }
        self.j0.copy_from_slice(&self.j);
        self.field0.copy_from_slice(&self.base_field);
    }

    pub fn pump(&self, t: f64) -> f64 {
        self.network.params.pump_ratio(t) * self.network.g_c
    }

    pub fn energy(&mut self, t: f64, state: &NetworkState) -> EnergyTerms {
        let n = self.n();
        self.refresh(t, |i| state.positions[i]);
        let g = self.pump(t);
        let p = &self.network.params;
        let mut e = EnergyTerms {
            transverse: p.omega_z * state.sz.iter().sum::<f64>(),
            ..Default::default()
        };
        for i in 0..n {
            for k in 0..n {
                e.ising -= g * self.j[i * n + k] * state.sx[i] * state.sx[k];
            }
            e.stimulus -= self.field[i] * state.sx[i];
        }
        if let Some(e_trap) = p.elasticity.e_trap() {
            let w2 = p.w_t * p.w_t;
            for (r, c) in state.positions.iter().zip(&self.drive.centres) {
                e.trap += 0.5 * e_trap * ((r[0] - c[0]).powi(2) + (r[1] - c[1]).powi(2)) / w2;
            }
        }
        e
    }

    /// `∂E/∂r_i` for every site.
    pub fn position_gradient(&mut self, t: f64, state: &NetworkState) -> Vec<Point> {
        self.refresh(t, |i| state.positions[i]);
        let g = self.pump(t);
        let sx = &state.sx;
        self.gradient(g, sx, |i| state.positions[i])
    }

    fn gradient(&self, g: f64, sx: &[f64], pos: impl Fn(usize) -> Point) -> Vec<Point> {
        let n = self.n();
        let p = &self.network.params;
        let mut out = vec![[0.0; 2]; n];
        for i in 0..n {
            let mut acc = [0.0; 2];
            for k in 0..n {
                let d = self.dj[i * n + k];
                acc[0] += d[0] * sx[k];
                acc[1] += d[1] * sx[k];
            }
            for a in 0..2 {
                out[i][a] = -2.0 * g * sx[i] * acc[a] - sx[i] * self.dfield[i][a];
            }
            if let Some(e_trap) = p.elasticity.e_trap() {
                let r = pos(i);
                let c = self.drive.centres[i];
                for a in 0..2 {
                    out[i][a] += e_trap * (r[a] - c[a]) / (p.w_t * p.w_t);
                }
            }
        }
        out
    }

    /// Time derivative of the flat state.
    pub fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n();
        let (sx, rest) = y.split_at(n);
        let (sy, rest) = rest.split_at(n);
        let (sz, rest) = rest.split_at(n);
        let (xs, ys) = rest.split_at(n);
        self.refresh(t, |i| [xs[i], ys[i]]);
        let g = self.pump(t);
        let w = self.network.params.omega_z;
        for i in 0..n {
            let mut h = self.field[i];
            for k in 0..n {
                h += 2.0 * g * self.j[i * n + k] * sx[k];
            }
            dy[i] = -w * sy[i];
            dy[n + i] = w * sx[i] + h * sz[i];
            dy[2 * n + i] = -h * sy[i];
        }
        if self.network.params.elasticity.e_trap().is_some() {
            let rate = self.network.params.drift_rate();
            let grad = self.gradient(g, sx, |i| [xs[i], ys[i]]);
            for i in 0..n {
                dy[3 * n + i] = -rate * grad[i][0];
                dy[4 * n + i] = -rate * grad[i][1];
            }
        } else {
            dy[3 * n..].iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Normal state tilted by `amplitude * S` along `±x` per site.
pub(crate) fn seed_state(centres: &[Point], signs: &[f64], amplitude: f64) -> NetworkState {
    let mut s = NetworkState::normal(centres);
    for (i, &sg) in signs.iter().enumerate() {
        let x = sg * amplitude * SPIN;
        s.sx[i] = x;
        s.sz[i] = -(SPIN * SPIN - x * x).sqrt();
    }
    s
}
