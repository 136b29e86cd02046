use serde::{Deserialize, Serialize};
use spinmem::cavity::CavityParams;
use spinmem::hopfield::{hebbian, PatternSet};
use spinmem::pipeline::{
    run_pipeline, DescentOracle, IdentityOracle, NetworkOracle, PipelineConfig, PipelineReport, SemiclassicalOracle,
};
use spinmem::semiclassical::Network;
use spinmem::sk::sample_sk;
use spinmem::{DynamicsKind, RandomSource, SpinConfig};

use super::num;
use crate::config::Experiment;
use crate::output::{quoted, Artifacts, Table};
use crate::specs::{over_default, ElasticityLevel, Kind, NoiseSpec, PlanSpec, SimSpec};
use crate::CliError;

/// Stream for disorder and stored patterns, apart from the pipeline's own.
const DISORDER_STREAM: u64 = 9;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleSpec {
    Sk {
        n: usize,
        #[serde(default = "sd")]
        kind: Kind,
    },
    Hopfield {
        n: usize,
        p: usize,
        #[serde(default = "sd")]
        kind: Kind,
    },
    Semiclassical {
        #[serde(default)]
        plan: PlanSpec,
        #[serde(default, deserialize_with = "over_default")]
        cavity: CavityParams,
        #[serde(default = "SimSpec::fast")]
        sim: SimSpec,
        #[serde(default)]
        noise: NoiseSpec,
    },
    Identity {
        n: usize,
    },
}

fn sd() -> Kind {
    Kind(DynamicsKind::SD)
}

/// Elasticity levels crossed with noise settings, all sharing the pipeline's
/// random streams.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub elasticity: Vec<ElasticityLevel>,
    pub noise: Vec<NoiseSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscoverParams {
    pub oracle: OracleSpec,
    pub pipeline: PipelineConfig,
    pub grid: Option<Grid>,
}

impl Default for DiscoverParams {
    fn default() -> Self {
        Self {
            oracle: OracleSpec::Sk { n: 12, kind: sd() },
            pipeline: PipelineConfig::default(),
            grid: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    stored_patterns: Option<Vec<String>>,
    #[serde(flatten)]
    report: &'a PipelineReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_s: Option<f64>,
}

#[derive(Debug, Serialize)]
struct GridCell {
    elasticity: String,
    noise: String,
    report: PipelineReport,
}

#[derive(Debug, Serialize)]
struct GridReport {
    cells: Vec<GridCell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_s: Option<f64>,
}

fn descent(j: spinmem::CouplingMatrix, kind: Kind) -> Box<dyn NetworkOracle> {
    Box::new(DescentOracle::new(j, kind.0))
}

/// The oracle, plus the stored patterns for Hopfield networks.
fn build(spec: &OracleSpec, exp: &Experiment) -> Result<(Box<dyn NetworkOracle>, Option<Vec<SpinConfig>>), CliError> {
    let mut rng = RandomSource::new(exp.seed).split(DISORDER_STREAM);
    Ok(match spec {
        OracleSpec::Identity { n } => {
            if *n < 1 {
                return Err(CliError::Config("identity oracle needs n >= 1".into()));
            }
            (Box::new(IdentityOracle { n: *n }), None)
        }
        OracleSpec::Sk { n, kind } => (descent(sample_sk(*n, &mut rng)?.j, *kind), None),
        OracleSpec::Hopfield { n, p, kind } => {
            if *n < 2 || *p < 1 {
                return Err(CliError::Config("hopfield oracle needs n >= 2 and p >= 1".into()));
            }
            let set = PatternSet::random(*n, *p, &mut rng)?;
            let patterns = set.patterns().to_vec();
            (descent(hebbian(&set), *kind), Some(patterns))
        }
        OracleSpec::Semiclassical { plan, cavity, sim, noise } => {
            let network = Network::new(plan.resolve(exp)?, *cavity, sim.resolve()?)?;
            (Box::new(SemiclassicalOracle::new(network, noise.resolve()?)?), None)
        }
    })
}

fn candidates_csv(r: &PipelineReport) -> String {
    let mut t = Table::new(&[
        "id", "count", "accepted_patterns", "p0", "screened", "is_memory", "basin", "basin_err", "method", "volume",
        "volume_err", "reference",
    ]);
    for c in &r.candidates {
        let (basin, err, method) = match &c.curve {
            Some(k) => (
                num(k.basin),
                num(k.basin_err),
                serde_json::to_value(k.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        t.row(vec![
            c.id.to_string(),
            c.count.to_string(),
            c.accepted_patterns.to_string(),
            num(c.p0),
            c.screened.to_string(),
            c.is_memory.to_string(),
            basin,
            err,
            method,
            num(c.volume),
            num(c.volume_err),
            quoted(&c.reference.to_string()),
        ]);
    }
    t.finish()
}

fn memories_csv(r: &PipelineReport) -> String {
    let mut t = Table::new(&["memory", "candidate", "basin", "basin_err", "volume", "volume_err", "pattern"]);
    for (k, c) in r.candidates.iter().filter(|c| c.is_memory).enumerate() {
        let curve = c.curve.as_ref();
        t.row(vec![
            k.to_string(),
            c.id.to_string(),
            curve.map_or("nan".into(), |x| num(x.basin)),
            curve.map_or("nan".into(), |x| num(x.basin_err)),
            num(c.volume),
            num(c.volume_err),
            quoted(&c.reference.to_string()),
        ]);
    }
    t.finish()
}

fn samples_csv(r: &PipelineReport) -> String {
    let mut t = Table::new(&["m", "mean", "std"]);
    for row in &r.capacity_vs_samples.rows {
        t.row(vec![row.m.to_string(), num(row.mean), num(row.std)]);
    }
    t.finish()
}

fn run_grid(exp: &Experiment, p: &DiscoverParams, grid: &Grid) -> Result<Artifacts, CliError> {
    let OracleSpec::Semiclassical { plan, cavity, sim, .. } = &p.oracle else {
        return Err(CliError::Config("a grid needs the semiclassical oracle".into()));
    };
    if grid.elasticity.is_empty() || grid.noise.is_empty() {
        return Err(CliError::Config("grid elasticity and noise lists must not be empty".into()));
    }
    let plan = plan.resolve(exp)?;
    let base = sim.resolve()?;
    // validate every cell before the first long run
    let mut setups = Vec::new();
    for level in &grid.elasticity {
        let params = level.apply(base)?;
        params.validate()?;
        for noise in &grid.noise {
            setups.push((level, params, noise, noise.resolve()?));
        }
    }
    let rng = RandomSource::new(exp.seed);
    let mut cells = Vec::with_capacity(setups.len());
    for (level, params, spec, noise) in setups {
        let network = Network::new(plan.clone(), *cavity, params)?;
        let oracle = SemiclassicalOracle::new(network, noise)?;
        let report = run_pipeline(&oracle, &p.pipeline, &rng)?;
        cells.push(GridCell { elasticity: level.label.clone(), noise: spec.label(), report });
    }
    let mut t = Table::new(&[
        "elasticity", "noise", "n", "samples", "candidates", "capacity_count", "capacity", "capacity_err",
        "memory_volume_total", "extrapolated_count", "sampled_fraction",
    ]);
    for c in &cells {
        let r = &c.report;
        t.row(vec![
            quoted(&c.elasticity),
            quoted(&c.noise),
            r.n.to_string(),
            r.samples.to_string(),
            r.candidates.len().to_string(),
            r.capacity_count.to_string(),
            num(r.capacity),
            num(r.capacity_err),
            num(r.memory_volume_total),
            num(r.capacity_vs_samples.intercept),
            num(r.capacity_vs_samples.fraction),
        ]);
    }
    let meta = exp.meta(p);
    let mut out = Artifacts::new();
    out.csv("discover_grid.csv", &meta, &t.finish());
    out.json("discover_grid.json", &meta, &GridReport { cells, elapsed_s: exp.elapsed_s() })?;
    Ok(out)
}

pub fn run(exp: &Experiment) -> Result<Artifacts, CliError> {
    let p: DiscoverParams = exp.parse_params()?;
    p.pipeline.validate()?;
    if let Some(grid) = &p.grid {
        return run_grid(exp, &p, grid);
    }
    let (oracle, patterns) = build(&p.oracle, exp)?;
    let report = run_pipeline(oracle.as_ref(), &p.pipeline, &RandomSource::new(exp.seed))?;
    let meta = exp.meta(&p);
    let mut out = Artifacts::new();
    out.json(
        "discover_report.json",
        &meta,
        &Report {
            stored_patterns: patterns.map(|ps| ps.iter().map(|x| x.to_string()).collect()),
            report: &report,
            elapsed_s: exp.elapsed_s(),
        },
    )?;
    out.csv("memories.csv", &meta, &memories_csv(&report));
    out.csv("candidates.csv", &meta, &candidates_csv(&report));
    out.csv("capacity_vs_samples.csv", &meta, &samples_csv(&report));
    out.csv("recall_trials.csv", &meta, &report.trials_csv());
    Ok(out)
}
