use serde::{Deserialize, Serialize};
use spinmem::cavity::{coupling, mode_sum_coupling, plan_coupling_matrix, CavityParams, Point, MODE_SUM_CUTOFF};

use super::num;
use crate::config::Experiment;
use crate::output::{Artifacts, Table};
use crate::specs::{over_default, PlanSpec};
use crate::CliError;

/// Kernel values `J(anchor, p)` for `p` on the segment `from -> to`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scan {
    pub label: String,
    pub anchor: Point,
    pub from: Point,
    pub to: Point,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeSumCheck {
    pub cutoff: usize,
    /// Point pairs compared, spread over a disc of `radius` µm.
    pub pairs: usize,
    pub radius: f64,
    /// Tolerance relative to `sqrt(J(r,r) J(r',r'))`.
    pub rel_tol: f64,
}

impl Default for ModeSumCheck {
    fn default() -> Self {
        Self {
            cutoff: MODE_SUM_CUTOFF,
            pairs: 20,
            radius: 100.0,
            rel_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavityJParams {
    pub plan: PlanSpec,
    #[serde(deserialize_with = "over_default")]
    pub cavity: CavityParams,
    pub scans: Vec<Scan>,
    #[serde(deserialize_with = "over_default")]
    pub mode_sum: ModeSumCheck,
    pub mode_sum_check: bool,
    /// Also write the matrix in the binary container format.
    pub binary: bool,
}

impl Default for CavityJParams {
    fn default() -> Self {
        Self {
            plan: PlanSpec::default(),
            cavity: CavityParams::default(),
            scans: vec![Scan {
                label: "x".into(),
                anchor: [0.0, 0.0],
                from: [-150.0, 0.0],
                to: [150.0, 0.0],
                points: 301,
            }],
            mode_sum: ModeSumCheck::default(),
            mode_sum_check: false,
            binary: false,
        }
    }
}

#[derive(Debug, Serialize)]
struct Stats {
    min: f64,
    max: f64,
    mean: f64,
}

fn stats(xs: &[f64]) -> Stats {
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
    Stats { min, max, mean }
}

#[derive(Debug, Serialize)]
struct PairCheck {
    r: Point,
    rp: Point,
    closed_form: f64,
    mode_sum: f64,
    rel_err: f64,
}

#[derive(Debug, Serialize)]
struct ModeSumReport {
    cutoff: usize,
    rel_tol: f64,
    max_rel_err: f64,
    pairs: Vec<PairCheck>,
}

#[derive(Debug, Serialize)]
struct Summary {
    n: usize,
    diagonal: Stats,
    off_diagonal: Stats,
    max_eigenvalue: f64,
    max_eigenvalue_off_diagonal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode_sum: Option<ModeSumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_s: Option<f64>,
}

/// Deterministic pairs on a golden-angle spiral.
fn check_pairs(count: usize, radius: f64) -> Vec<(Point, Point)> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let f = (k as f64 + 0.5) / count as f64;
            let (a, b) = (golden * k as f64, golden * (k as f64 + 0.5) * 1.7);
            let r = radius * f.sqrt();
            let rp = radius * (1.0 - f).sqrt();
            ([r * a.cos(), r * a.sin()], [rp * b.cos(), rp * b.sin()])
        })
        .collect()
}

fn mode_sum_report(p: &CavityJParams) -> Result<ModeSumReport, CliError> {
    let m = &p.mode_sum;
    if m.pairs == 0 || !(m.radius > 0.0) || !(m.rel_tol > 0.0) {
        return Err(CliError::Config("mode_sum needs pairs >= 1, radius > 0, rel_tol > 0".into()));
    }
    let mut pairs = Vec::with_capacity(m.pairs);
    for (r, rp) in check_pairs(m.pairs, m.radius) {
        let closed_form = coupling(r, rp, &p.cavity);
        let mode_sum = mode_sum_coupling(r, rp, &p.cavity, m.cutoff)?;
        let scale = (coupling(r, r, &p.cavity) * coupling(rp, rp, &p.cavity)).sqrt();
        pairs.push(PairCheck {
            r,
            rp,
            closed_form,
            mode_sum,
            rel_err: (closed_form - mode_sum).abs() / scale,
        });
    }
    let max_rel_err = pairs.iter().map(|c| c.rel_err).fold(0.0, f64::max);
    Ok(ModeSumReport {
        cutoff: m.cutoff,
        rel_tol: m.rel_tol,
        max_rel_err,
        pairs,
    })
}

pub fn run(exp: &Experiment) -> Result<Artifacts, CliError> {
    let p: CavityJParams = exp.parse_params()?;
    p.cavity.validate()?;
    let plan = p.plan.resolve(exp)?;
    if let Some(s) = p.scans.iter().find(|s| s.points < 2) {
        return Err(CliError::Config(format!("scan {:?} needs at least 2 points", s.label)));
    }
    let j = plan_coupling_matrix(&plan, &p.cavity)?;
    let n = j.n();
    let off: Vec<f64> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .map(|(a, b)| j.get(a, b))
        .collect();
    let mode_sum = if p.mode_sum_check {
        let r = mode_sum_report(&p)?;
        if !(r.max_rel_err <= r.rel_tol) {
            return Err(CliError::Run(format!(
                "mode-sum check failed: max relative error {:e} > {:e}",
                r.max_rel_err, r.rel_tol
            )));
        }
        Some(r)
    } else {
        None
    };
    let summary = Summary {
        n,
        diagonal: stats(&j.diagonal()),
        off_diagonal: if off.is_empty() { Stats { min: f64::NAN, max: f64::NAN, mean: f64::NAN } } else { stats(&off) },
        max_eigenvalue: j.max_eigenvalue(),
        max_eigenvalue_off_diagonal: j.without_diagonal().max_eigenvalue(),
        mode_sum,
        elapsed_s: exp.elapsed_s(),
    };

    let header: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut matrix = Table::new(&header);
    for a in 0..n {
        matrix.row(j.row(a).iter().map(|&v| num(v)).collect());
    }
    let mut sites = Table::new(&["site", "x_um", "y_um"]);
    for (i, s) in plan.sites().iter().enumerate() {
        sites.row(vec![i.to_string(), num(s[0]), num(s[1])]);
    }
    let mut scans = Table::new(&["scan", "index", "x_um", "y_um", "anchor_x_um", "anchor_y_um", "j"]);
    for s in &p.scans {
        for k in 0..s.points {
            let t = k as f64 / (s.points - 1) as f64;
            let q = [s.from[0] + t * (s.to[0] - s.from[0]), s.from[1] + t * (s.to[1] - s.from[1])];
            scans.row(vec![
                crate::output::quoted(&s.label),
                k.to_string(),
                num(q[0]),
                num(q[1]),
                num(s.anchor[0]),
                num(s.anchor[1]),
                num(coupling(s.anchor, q, &p.cavity)),
            ]);
        }
    }

    let meta = exp.meta(&p);
    let mut out = Artifacts::new();
    out.csv("j_matrix.csv", &meta, &matrix.finish());
    out.csv("sites.csv", &meta, &sites.finish());
    out.csv("kernel_scans.csv", &meta, &scans.finish());
    out.json("cavity_summary.json", &meta, &summary)?;
    if p.binary {
        let mut buf = Vec::new();
        j.write_binary(&mut buf)?;
        out.bytes("j_matrix.bin", buf);
    }
    Ok(out)
}
