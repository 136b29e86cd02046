use serde::{Deserialize, Serialize};
use spinmem::hopfield::{capacity_sweep, linear_fit, MemoryCriterion, RecallEstimator};
use spinmem::{DynamicsKind, RandomSource, Scoring};

use super::num;
use crate::config::Experiment;
use crate::output::{Artifacts, Table};
use crate::specs::Kind;
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HopfieldParams {
    pub n: Vec<usize>,
    pub p: Vec<usize>,
    pub realizations: usize,
    pub kind: Kind,
    pub threshold: f64,
    pub estimator: RecallEstimator,
    pub scoring: Scoring,
    /// Smallest n included in the linear capacity fit.
    pub fit_min_n: usize,
}

impl Default for HopfieldParams {
    fn default() -> Self {
        Self {
            n: vec![16],
            p: (1..=10).collect(),
            realizations: 10_000,
            kind: Kind(DynamicsKind::MH),
            threshold: 0.5,
            estimator: RecallEstimator::Exact { fallback_trials: 1000 },
            scoring: Scoring::Exact,
            fit_min_n: 10,
        }
    }
}

#[derive(Debug, Serialize)]
struct PerN {
    n: usize,
    argmax_p: usize,
    max_mean: f64,
    max_std: f64,
    /// The maximum sits at the end of the P list; extend it.
    argmax_at_edge: bool,
    thermodynamic: f64,
}

#[derive(Debug, Serialize)]
struct Fit {
    intercept: f64,
    slope: f64,
    n_min: usize,
    points: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    per_n: Vec<PerN>,
    fit: Option<Fit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_s: Option<f64>,
}

pub fn run(exp: &Experiment) -> Result<Artifacts, CliError> {
    let params: HopfieldParams = exp.parse_params()?;
    if params.n.is_empty() || params.p.is_empty() {
        return Err(CliError::Config("n and p lists must not be empty".into()));
    }
    if let Some(&bad) = params.n.iter().find(|&&n| n < 2) {
        return Err(CliError::Config(format!("n must be >= 2, got {bad}")));
    }
    let criterion = MemoryCriterion {
        threshold: params.threshold,
        kind: params.kind.0,
        estimator: params.estimator,
        scoring: params.scoring,
    };
    let rng = RandomSource::new(exp.seed);
    let mut table = Table::new(&["n", "p", "mean", "std", "realizations"]);
    let mut per_n = Vec::new();
    for &n in &params.n {
        let sweep = capacity_sweep(n, &params.p, params.realizations, &criterion, &rng)?;
        for r in &sweep.rows {
            table.row(vec![r.n.to_string(), r.p.to_string(), num(r.mean), num(r.std), r.realizations.to_string()]);
        }
        per_n.push(PerN {
            n,
            argmax_p: sweep.argmax_p,
            max_mean: sweep.max_mean,
            max_std: sweep.max_std,
            argmax_at_edge: sweep.argmax_p == *params.p.iter().max().expect("non-empty") && params.p.len() > 1,
            thermodynamic: 0.138 * n as f64,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = per_n
        .iter()
        .filter(|r| r.n >= params.fit_min_n)
        .map(|r| (r.n as f64, r.max_mean))
        .unzip();
    let fit = linear_fit(&xs, &ys).ok().map(|(intercept, slope)| Fit {
        intercept,
        slope,
        n_min: params.fit_min_n,
        points: xs.len(),
    });
    let meta = exp.meta(&params);
    let mut out = Artifacts::new();
    out.csv("hopfield_capacity.csv", &meta, &table.finish());
    out.json("hopfield_summary.json", &meta, &Summary { per_n, fit, elapsed_s: exp.elapsed_s() })?;
    Ok(out)
}
