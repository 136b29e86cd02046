use serde::{Deserialize, Serialize};
use spinmem::dynamics::EXHAUSTIVE_LIMIT;
use spinmem::sk::{sk_summary, MinimaSearch, SkRow, SkSettings, SkSummary};
use spinmem::{DynamicsKind, RandomSource, Scoring};

use super::num;
use crate::config::Experiment;
use crate::output::{Artifacts, Table};
use crate::specs::Kind;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Search {
    /// Exhaustive up to n = 20, random restarts above.
    Auto,
    Exhaustive,
    Restarts,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkParams {
    pub n: Vec<usize>,
    pub kinds: Vec<Kind>,
    pub thresholds: Vec<f64>,
    pub realizations: usize,
    pub search: Search,
    /// Random starts per realization when restarting.
    pub starts: usize,
    /// Sampled trials when the exact recall memo overflows.
    pub trials: usize,
    pub scoring: Scoring,
}

impl Default for SkParams {
    fn default() -> Self {
        Self {
            n: vec![8, 12, 16, 20],
            kinds: vec![Kind(DynamicsKind::SD), Kind(DynamicsKind::MH)],
            thresholds: vec![0.5, 0.75],
            realizations: 200,
            search: Search::Auto,
            starts: 54_000,
            trials: 100,
            scoring: Scoring::Exact,
        }
    }
}

#[derive(Debug, Serialize)]
struct Cell {
    #[serde(flatten)]
    summary: SkSummary,
}

#[derive(Debug, Serialize)]
struct Comparison {
    n: usize,
    threshold: f64,
    sd_capacity: f64,
    mh_capacity: f64,
    sd_fraction: f64,
    mh_fraction: f64,
}

#[derive(Debug, Serialize)]
struct Report {
    cells: Vec<Cell>,
    /// SD against MH at each (n, threshold), when both were run.
    sd_vs_mh: Vec<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_s: Option<f64>,
}

fn settings(p: &SkParams, n: usize, kind: Kind, threshold: f64) -> SkSettings {
    let search = match p.search {
        Search::Auto => MinimaSearch::for_size(n, p.starts),
        Search::Exhaustive => MinimaSearch::Exhaustive,
        Search::Restarts => MinimaSearch::Restarts { starts: p.starts },
    };
    SkSettings {
        kind: kind.0,
        threshold,
        search,
        trials: p.trials,
        scoring: p.scoring,
    }
}

fn csv_row(t: &mut Table, metric: &str, r: &SkRow, mean_minima: f64) {
    t.row(vec![
        metric.into(),
        r.n.to_string(),
        r.kind.to_string(),
        num(r.threshold),
        r.realizations.to_string(),
        num(r.mean),
        num(r.std),
        num(r.stderr),
        num(mean_minima),
    ]);
}

pub fn run(exp: &Experiment) -> Result<Artifacts, CliError> {
    let p: SkParams = exp.parse_params()?;
    if p.n.is_empty() || p.kinds.is_empty() || p.thresholds.is_empty() {
        return Err(CliError::Config("n, kinds and thresholds must not be empty".into()));
    }
    if p.realizations == 0 {
        return Err(CliError::Config("realizations must be >= 1".into()));
    }
    for &n in &p.n {
        if n < 2 {
            return Err(CliError::Config(format!("SK needs n >= 2, got {n}")));
        }
        if p.search == Search::Exhaustive && n > EXHAUSTIVE_LIMIT {
            return Err(CliError::Config(format!(
                "exhaustive enumeration refused for n = {n} (limit {EXHAUSTIVE_LIMIT})"
            )));
        }
    }
    if let Some(t) = p.thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(CliError::Config(format!("threshold must lie in (0, 1), got {t}")));
    }
    // one root stream: every cell sees the same disorder realizations
    let rng = RandomSource::new(exp.seed);
    let mut cells = Vec::new();
    for &n in &p.n {
        for &kind in &p.kinds {
            for &thr in &p.thresholds {
                cells.push(Cell { summary: sk_summary(n, &settings(&p, n, kind, thr), p.realizations, &rng)? });
            }
        }
    }
    let mut table = Table::new(&["metric", "n", "kind", "threshold", "realizations", "mean", "std", "stderr", "mean_minima"]);
    for c in &cells {
        csv_row(&mut table, "capacity", &c.summary.capacity, c.summary.mean_minima);
    }
    for c in &cells {
        csv_row(&mut table, "fraction", &c.summary.fraction, c.summary.mean_minima);
    }
    let find = |n: usize, kind: DynamicsKind, thr: f64| {
        cells
            .iter()
            .find(|c| c.summary.capacity.n == n && c.summary.capacity.kind == kind && c.summary.capacity.threshold == thr)
    };
    let mut sd_vs_mh = Vec::new();
    for &n in &p.n {
        for &thr in &p.thresholds {
            if let (Some(sd), Some(mh)) = (find(n, DynamicsKind::SD, thr), find(n, DynamicsKind::MH, thr)) {
                sd_vs_mh.push(Comparison {
                    n,
                    threshold: thr,
                    sd_capacity: sd.summary.capacity.mean,
                    mh_capacity: mh.summary.capacity.mean,
                    sd_fraction: sd.summary.fraction.mean,
                    mh_fraction: mh.summary.fraction.mean,
                });
            }
        }
    }
    let meta = exp.meta(&p);
    let mut out = Artifacts::new();
    out.csv("sk.csv", &meta, &table.finish());
    out.json("sk_summary.json", &meta, &Report { cells, sd_vs_mh, elapsed_s: exp.elapsed_s() })?;
    Ok(out)
}
