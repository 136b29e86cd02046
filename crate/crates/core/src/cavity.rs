//! Confocal multimode-cavity coupling kernel and stimulus field.
//!
//! Lengths are in micrometres; kernels are dimensionless.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{CouplingMatrix, SpinConfig};

pub type Point = [f64; 2];

/// Order of the cavity's mode-family degeneracy.
const FAMILY: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Fundamental mode waist (µm).
    pub w0: f64,
    /// Gaussian standard deviation of the atomic density (µm).
    pub sigma_a: f64,
    /// Mode family index.
    pub eta: i64,
    /// Pump-cavity detuning (rad/s).
    pub delta_c: f64,
    /// Cavity field decay rate (rad/s).
    pub kappa: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            w0: 34.8,
            sigma_a: 5.2,
            eta: 0,
            delta_c: -2.0 * std::f64::consts::PI * 20.0e6,
            kappa: 2.0 * std::f64::consts::PI * 140.0e3,
        }
    }
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w0 > 0.0 && self.w0.is_finite()) {
            return Err(Error::Validation(format!("w0 must be positive, got {}", self.w0)));
        }
        if !(self.sigma_a > 0.0 && self.sigma_a.is_finite()) {
            return Err(Error::Validation(format!(
                "sigma_a must be positive, got {}",
                self.sigma_a
            )));
        }
        if !(self.delta_c.is_finite() && self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::Validation("delta_c and kappa must be finite, kappa >= 0".into()));
        }
        if self.delta_c == 0.0 && self.kappa == 0.0 {
            return Err(Error::Validation("delta_c and kappa cannot both vanish".into()));
        }
        Ok(())
    }

    /// `(1 - 2 σ²/w0²) / (1 + 2 σ²/w0²)`; always in `(-1, 1)`.
    pub fn gamma(&self) -> f64 {
        let a = 2.0 * self.sigma_a * self.sigma_a / (self.w0 * self.w0);
        (1.0 - a) / (1.0 + a)
    }

    /// Dispersive prefactor `Δ²/(Δ² + κ²)`.
    pub fn prefactor(&self) -> f64 {
        let d2 = self.delta_c * self.delta_c;
        d2 / (d2 + self.kappa * self.kappa)
    }

    fn family_phase(&self, k: usize) -> Complex64 {
        let theta = -(self.eta as f64) * 2.0 * std::f64::consts::PI * k as f64 / FAMILY as f64;
        Complex64::from_polar(1.0, theta)
    }
}

fn root_of_unity(k: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / FAMILY as f64)
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Mehler-type kernel `G'(r, r', t)` smoothed over the atomic density.
pub fn mehler_kernel(r: Point, rp: Point, t: Complex64, params: &CavityParams) -> Result<Complex64> {
    let (a, b) = kernel_parts(t, params.gamma())?;
    let w2 = params.w0 * params.w0;
    let g = params.gamma();
    let q = (1.0 + g * t * t) * ((dot(r, r) + dot(rp, rp)) / w2)
        - 2.0 * (1.0 + g) * t * (dot(r, rp) / w2);
    Ok(a * (-b * q).exp())
}

/// Amplitude and exponent scale of the kernel at `t`.
fn kernel_parts(t: Complex64, g: f64) -> Result<(Complex64, Complex64)> {
    let den = 1.0 - g * g * t * t;
    if den.norm() < 1e-300 || !den.is_finite() {
        return Err(Error::Domain(format!("singular Mehler denominator at t = {t}")));
    }
    let a = (1.0 + g) * (1.0 + g) / (4.0 * den);
    let b = (1.0 + g) / (2.0 * den);
    Ok((a, b))
}

/// Precomputed kernel coefficients for the four distinct family phases.
#[derive(Debug, Clone)]
pub struct KernelTable {
    terms: Vec<KernelTerm>,
    inv_w2: f64,
}

#[derive(Debug, Clone, Copy)]
struct KernelTerm {
    /// family weight times phase, times the amplitude
    amp: Complex64,
    /// exponent scale
    b: Complex64,
    c1: Complex64,
    c2: Complex64,
}

impl KernelTable {
    pub fn new(params: &CavityParams) -> Result<Self> {
        params.validate()?;
        let g = params.gamma();
        let w = params.prefactor() / FAMILY as f64;
        let mut terms = Vec::with_capacity(4);
        for k in 0..=(FAMILY - 1) / 2 {
            let t = root_of_unity(k);
            let (a, b) = kernel_parts(t, g)?;
            let weight = if k == 0 { w } else { 2.0 * w };
            terms.push(KernelTerm {
                amp: weight * params.family_phase(k) * a,
                b,
                c1: 1.0 + g * t * t,
                c2: (1.0 + g) * t,
            });
        }
        Ok(Self {
            terms,
            inv_w2: 1.0 / (params.w0 * params.w0),
        })
    }

    pub fn value(&self, r: Point, rp: Point) -> f64 {
        let s = (dot(r, r) + dot(rp, rp)) * self.inv_w2;
        let x = dot(r, rp) * self.inv_w2;
        self.terms
            .iter()
            .map(|k| (k.amp * (-k.b * (k.c1 * s - 2.0 * k.c2 * x)).exp()).re)
            .sum()
    }

    /// `J(r, r')`, `∂J/∂r` and `∂J/∂r'`.
    pub fn with_grad(&self, r: Point, rp: Point) -> (f64, Point, Point) {
        let s = (dot(r, r) + dot(rp, rp)) * self.inv_w2;
        let x = dot(r, rp) * self.inv_w2;
        let mut val = 0.0;
        let mut gr = [0.0; 2];
        let mut grp = [0.0; 2];
        for k in &self.terms {
            let v = k.amp * (-k.b * (k.c1 * s - 2.0 * k.c2 * x)).exp();
            let d = -2.0 * self.inv_w2 * k.b * v;
            let (p, q) = (d * k.c1, d * k.c2);
            val += v.re;
            for i in 0..2 {
                gr[i] += p.re * r[i] - q.re * rp[i];
                grp[i] += p.re * rp[i] - q.re * r[i];
            }
        }
        (val, gr, grp)
    }
}

/// Cavity-mediated coupling `J(r, r')` between two atomic ensembles.
pub fn coupling(r: Point, rp: Point, params: &CavityParams) -> f64 {
    KernelTable::new(params).expect("valid cavity parameters").value(r, rp)
}

/// Analytic gradients `(∂J/∂r, ∂J/∂r')`.
pub fn grad_coupling(r: Point, rp: Point, params: &CavityParams) -> (Point, Point) {
    let (_, a, b) = coupling_with_grad(r, rp, params);
    (a, b)
}

/// `J(r, r')` together with both gradients.
pub fn coupling_with_grad(r: Point, rp: Point, params: &CavityParams) -> (f64, Point, Point) {
    KernelTable::new(params).expect("valid cavity parameters").with_grad(r, rp)
}

/// Default mode cutoff `l + m <= cut` for [`mode_sum_coupling`].
pub const MODE_SUM_CUTOFF: usize = 70;

/// Density overlaps `∫ρ(x) ψ_l(x) dx` for `l = 0..=cut`, with `ψ_l` the
/// normalised Hermite functions of the cavity waist.
fn mode_overlaps(x0: f64, params: &CavityParams, cut: usize) -> Vec<f64> {
    let s = params.sigma_a;
    let steps = 1600;
    let half = 10.0 * s;
    let h = 2.0 * half / steps as f64;
    let mut acc = vec![0.0; cut + 1];
    let mut psi = vec![0.0; cut + 1];
    for k in 0..=steps {
        let x = x0 - half + k as f64 * h;
        let z = (x - x0) / s;
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 } * h * (-0.5 * z * z).exp()
            / ((2.0 * std::f64::consts::PI).sqrt() * s);
        let u = std::f64::consts::SQRT_2 * x / params.w0;
        psi[0] = (-0.5 * u * u).exp();
        if cut >= 1 {
            psi[1] = std::f64::consts::SQRT_2 * u * psi[0];
        }
        for l in 2..=cut {
            let lf = l as f64;
            psi[l] = (2.0 / lf).sqrt() * u * psi[l - 1] - ((lf - 1.0) / lf).sqrt() * psi[l - 2];
        }
        for (a, p) in acc.iter_mut().zip(&psi) {
            *a += w * p;
        }
    }
    acc
}

/// `J(r, r')` as an explicit sum over the degenerate family's modes with
/// `l + m <= cut`. Slow; a cross-check of the closed form.
pub fn mode_sum_coupling(r: Point, rp: Point, params: &CavityParams, cut: usize) -> Result<f64> {
    params.validate()?;
    let (ax, ay) = (mode_overlaps(r[0], params, cut), mode_overlaps(r[1], params, cut));
    let (bx, by) = (mode_overlaps(rp[0], params, cut), mode_overlaps(rp[1], params, cut));
    let eta = params.eta.rem_euclid(FAMILY as i64) as usize;
    let mut sum = 0.0;
    for l in 0..=cut {
        for m in 0..=(cut - l) {
            if (l + m) % FAMILY == eta {
                sum += ax[l] * ay[m] * bx[l] * by[m];
            }
        }
    }
    Ok(params.prefactor() * sum)
}

/// Trap centres of the atomic ensembles in the cavity midplane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SitePlan {
    sites: Vec<Point>,
}

impl SitePlan {
    pub fn new(sites: Vec<Point>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Validation("site plan is empty".into()));
        }
        for (i, p) in sites.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::Validation(format!("site {i} is not finite")));
            }
            for (k, q) in sites[..i].iter().enumerate() {
                if p == q {
                    return Err(Error::Validation(format!("sites {k} and {i} coincide")));
                }
            }
        }
        Ok(Self { sites })
    }

    /// Cartesian grid, `y` outer and `x` inner.
    pub fn grid(xs: &[f64], ys: &[f64]) -> Result<Self> {
        Self::new(ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect())
    }

    /// The 16-site J1 grid.
    pub fn j1() -> Self {
        Self::grid(&[-79.0, -23.0, 34.0, 89.0], &[-94.0, -31.0, 28.0, 91.0]).expect("distinct sites")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sites: Vec<Point> = serde_json::from_str(s)?;
        Self::new(sites)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.sites).expect("points serialize")
    }

    pub fn sites(&self) -> &[Point] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

/// `J_ij = J(r_i, r_j)`, diagonal included.
pub fn coupling_matrix(positions: &[Point], params: &CavityParams) -> Result<CouplingMatrix> {
    params.validate()?;
    let table = KernelTable::new(params)?;
    let n = positions.len();
    CouplingMatrix::from_upper(n, |i, j| table.value(positions[i], positions[j]))
}

/// Coupling matrix at the plan's trap centres.
pub fn plan_coupling_matrix(plan: &SitePlan, params: &CavityParams) -> Result<CouplingMatrix> {
    coupling_matrix(plan.sites(), params)
}

/// Longitudinal stimulus bias at `r`: `amp cos(phase) Σ_i s_i J(r, r_i)`.
pub fn stimulus_field(
    r: Point,
    plan: &SitePlan,
    signs: &SpinConfig,
    amp: f64,
    phase: f64,
    params: &CavityParams,
) -> Result<f64> {
    stimulus_with_grad(r, plan, signs, amp, phase, params).map(|(f, _)| f)
}

/// Stimulus field and its gradient with respect to `r`.
pub fn stimulus_with_grad(
    r: Point,
    plan: &SitePlan,
    signs: &SpinConfig,
    amp: f64,
    phase: f64,
    params: &CavityParams,
) -> Result<(f64, Point)> {
    if signs.len() != plan.len() {
        return Err(Error::Dimension {
            expected: plan.len(),
            actual: signs.len(),
        });
    }
    if !signs.is_binary() {
        return Err(Error::Validation("stimulus signs must be binary".into()));
    }
    let table = KernelTable::new(params)?;
    let c = amp * phase.cos();
    let mut f = 0.0;
    let mut g = [0.0; 2];
    for (s, &site) in signs.values().iter().zip(plan.sites()) {
        let (v, gr, _) = table.with_grad(r, site);
        f += s * v;
        g[0] += s * gr[0];
        g[1] += s * gr[1];
    }
    Ok((c * f, [c * g[0], c * g[1]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mode_sum_agrees_with_closed_form() {
        let p = CavityParams::default();
        for (r, q) in [([0.0, 0.0], [0.0, 0.0]), ([30.0, -12.0], [-55.0, 40.0]), ([-79.0, -94.0], [89.0, 91.0])] {
            let a = coupling(r, q, &p);
            let b = mode_sum_coupling(r, q, &p, MODE_SUM_CUTOFF).unwrap();
            assert!((a - b).abs() < 1e-3 * a.abs().max(1e-2), "{a} vs {b}");
        }
    }

    fn p() -> CavityParams {
        CavityParams::default()
    }

    #[test]
    fn origin_kernel() {
        let g = p().gamma();
        let v = mehler_kernel([0.0; 2], [0.0; 2], Complex64::new(1.0, 0.0), &p()).unwrap();
        assert!((v.re - (1.0 + g).powi(2) / (4.0 * (1.0 - g * g))).abs() < 1e-14);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn point_kernel_limit() {
        let params = CavityParams {
            sigma_a: 34.8 / 2f64.sqrt(),
            ..p()
        };
        assert!(params.gamma().abs() < 1e-15);
        let (r, rp) = ([3.0, -7.0], [12.0, 5.0]);
        let v = mehler_kernel(r, rp, Complex64::new(1.0, 0.0), &params).unwrap();
        let d2 = (r[0] - rp[0]).powi(2) + (r[1] - rp[1]).powi(2);
        let expect = 0.25 * (-d2 / (2.0 * 34.8 * 34.8)).exp();
        assert!((v.re - expect).abs() < 1e-14);
    }

    #[test]
    fn gamma_in_range() {
        let g = p().gamma();
        let a = 2.0 * 5.2 * 5.2 / (34.8 * 34.8);
        assert!((g - (1.0 - a) / (1.0 + a)).abs() < 1e-12);
        assert!(g.abs() < 1.0);
    }

    #[test]
    fn j1_structure() {
        let m = plan_coupling_matrix(&SitePlan::j1(), &p()).unwrap();
        let diag = m.diagonal();
        assert!(diag.iter().all(|&d| d > 0.0));
        let mean = diag.iter().sum::<f64>() / 16.0;
        // independent numpy evaluation of the closed form gives 0.80818
        assert!((mean - 0.80818).abs() < 1e-4, "diagonal mean {mean}");
        let mut off = Vec::new();
        for i in 0..16 {
            for j in 0..16 {
                if i != j {
                    off.push(m.get(i, j));
                }
            }
        }
        assert!(off.iter().any(|&x| x > 0.0) && off.iter().any(|&x| x < 0.0));
    }

    #[test]
    fn mirror_pairs_are_strong() {
        let plan = SitePlan::j1();
        let m = plan_coupling_matrix(&plan, &p()).unwrap();
        let mut off: Vec<f64> = Vec::new();
        for i in 0..16 {
            for j in i + 1..16 {
                off.push(m.get(i, j).abs());
            }
        }
        off.sort_by(f64::total_cmp);
        let median = off[off.len() / 2];
        // nearest pair to a point reflection through the axis
        let s = plan.sites();
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..16 {
            for j in i + 1..16 {
                let d = (s[i][0] + s[j][0]).hypot(s[i][1] + s[j][1]);
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        assert!(m.get(best.1, best.2).abs() > median);
    }

    #[test]
    fn gradient_zero_at_origin() {
        let (a, b) = grad_coupling([0.0; 2], [0.0; 2], &p());
        assert!(a.iter().chain(b.iter()).all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn stimulus_phase_and_single_site() {
        let plan = SitePlan::new(vec![[10.0, -20.0]]).unwrap();
        let s = SpinConfig::from_signs(&[1]).unwrap();
        let f = stimulus_field([10.0, -20.0], &plan, &s, 0.5, 0.0, &p()).unwrap();
        assert!(f > 0.0);
        let z = stimulus_field([10.0, -20.0], &plan, &s, 0.5, std::f64::consts::FRAC_PI_2, &p()).unwrap();
        assert!(z.abs() < 1e-16);
    }

    #[test]
    fn stimulus_lobes_follow_pattern() {
        let plan = SitePlan::j1();
        let mut r = crate::RandomSource::new(3);
        let (mut hits, mut total) = (0, 0);
        for _ in 0..200 {
            let s = SpinConfig::random_binary(16, &mut r);
            for (i, &site) in plan.sites().iter().enumerate() {
                let f = stimulus_field(site, &plan, &s, 1.0, 0.0, &p()).unwrap();
                hits += (f.signum() == s.values()[i]) as usize;
                total += 1;
            }
        }
        assert!(hits as f64 > 0.95 * total as f64, "{hits}/{total}");
    }

    #[test]
    fn plan_json_roundtrip() {
        let plan = SitePlan::j1();
        assert_eq!(SitePlan::from_json(&plan.to_json()).unwrap(), plan);
        assert!(SitePlan::new(vec![[1.0, 1.0], [1.0, 1.0]]).is_err());
    }

    fn point() -> impl Strategy<Value = Point> {
        (-70.0..70.0f64, -70.0..70.0f64).prop_map(|(x, y)| [x, y])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn symmetric_kernel(r in point(), rp in point(), k in 0usize..4) {
            let t = root_of_unity(k);
            let a = mehler_kernel(r, rp, t, &p()).unwrap();
            let b = mehler_kernel(rp, r, t, &p()).unwrap();
            prop_assert!((a - b).norm() <= 1e-14 * a.norm().max(1e-300));
            prop_assert_eq!(coupling(r, rp, &p()), coupling(rp, r, &p()));
        }

        #[test]
        fn rotation_covariance(r in point(), rp in point(), th in 0.0..std::f64::consts::TAU) {
            let rot = |v: Point| [th.cos() * v[0] - th.sin() * v[1], th.sin() * v[0] + th.cos() * v[1]];
            let a = coupling(r, rp, &p());
            let b = coupling(rot(r), rot(rp), &p());
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn gradient_matches_finite_differences(r in point(), rp in point()) {
            let h = 1e-4;
            let (gr, grp) = grad_coupling(r, rp, &p());
            let scale = (coupling(r, r, &p()) * coupling(rp, rp, &p())).sqrt() / p().w0;
            for d in 0..2 {
                let mut a = r; a[d] += h;
                let mut b = r; b[d] -= h;
                let fd = (coupling(a, rp, &p()) - coupling(b, rp, &p())) / (2.0 * h);
                prop_assert!((fd - gr[d]).abs() <= 1e-6 * gr[d].abs().max(scale), "{} vs {}", fd, gr[d]);
                let mut a = rp; a[d] += h;
                let mut b = rp; b[d] -= h;
                let fd = (coupling(r, a, &p()) - coupling(r, b, &p())) / (2.0 * h);
                prop_assert!((fd - grp[d]).abs() <= 1e-6 * grp[d].abs().max(scale));
            }
        }

        #[test]
        fn gradient_exchange(r in point(), rp in point()) {
            let (a, _) = grad_coupling(r, rp, &p());
            let (_, b) = grad_coupling(rp, r, &p());
            prop_assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }

        #[test]
        fn stimulus_linear(mask in proptest::collection::vec(0u8..3, 16), r in point()) {
            // 0: in s only, 1: in s' only, 2: in neither
            let plan = SitePlan::j1();
            let pick = |k: u8| -> Vec<f64> { mask.iter().map(|&m| if m == k { 1.0 } else { 0.0 }).collect() };
            let field = |w: &[f64]| -> f64 {
                plan.sites().iter().zip(w).map(|(&q, &x)| x * coupling(r, q, &p())).sum()
            };
            let (a, b) = (pick(0), pick(1));
            let both: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            prop_assert!((field(&both) - field(&a) - field(&b)).abs() < 1e-13);
        }
    }
}
