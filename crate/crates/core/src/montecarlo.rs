//! Seeded replication studies over scenario grids and estimation methods.
//!
//! Replicate `r` of scenario `s` draws everything from
//! `derive_seed(base_seed, s, r)`, so a row depends only on its key and the
//! table is the same for any worker count. Every `n` of a scenario reuses the
//! same replicate seeds.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::LocalCovariances;
use crate::kernels::{decile_boundaries, DEFAULT_KERNELS};
use crate::metrics::{d_index, gap_report};
use crate::simulate::rng::derive_seed;
use crate::simulate::{gen_dataset, Marginal, MaternSpec, OmegaSpec, ScenarioConfig, SimulatedDataset};

/// How `Ŵ` is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// All rings.
    Multi,
    /// Ring `h` alone (1-based).
    Single(usize),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Multi => f.write_str("multi"),
            Method::Single(h) => write!(f, "single:{h}"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "multi" {
            return Ok(Method::Multi);
        }
        s.strip_prefix("single:")
            .and_then(|h| h.parse().ok())
            .map(Method::Single)
            .ok_or_else(|| {
                Error::InvalidConfig(format!("methods: expected \"multi\" or \"single:<h>\", got \"{s}\""))
            })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Scenario settings without `n` and seed, which the grid supplies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    /// Label used in output tables; defaults to `p<p>-<marginal>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub p: usize,
    #[serde(rename = "box", default = "default_box")]
    pub box_side: f64,
    #[serde(default)]
    pub marginal: Marginal,
    #[serde(default)]
    pub matern: MaternSpec,
    #[serde(default)]
    pub omega: OmegaSpec,
}

fn default_box() -> f64 {
    ScenarioConfig::new(2, 1, 0).box_side
}

impl ScenarioTemplate {
    pub fn new(p: usize, marginal: Marginal) -> Self {
        Self {
            id: None,
            p,
            box_side: default_box(),
            marginal,
            matern: MaternSpec::Random,
            omega: OmegaSpec::Identity,
        }
    }

    pub fn label(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| format!("p{}-{}", self.p, self.marginal.as_str()))
    }

    pub fn config(&self, n: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n,
            p: self.p,
            box_side: self.box_side,
            marginal: self.marginal,
            matern: self.matern.clone(),
            omega: self.omega.clone(),
            seed,
        }
    }
}

fn default_kernels() -> usize {
    DEFAULT_KERNELS
}

/// A study: every scenario at every `n`, `replications` times, each
/// replicate estimated with every method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyGrid {
    pub scenarios: Vec<ScenarioTemplate>,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub base_seed: u64,
    /// Number of rings in the bank.
    #[serde(default = "default_kernels")]
    pub kernels: usize,
}

fn all_methods(k: usize) -> Vec<Method> {
    std::iter::once(Method::Multi).chain((1..=k).map(Method::Single)).collect()
}

impl StudyGrid {
    /// Desk-scale study: `R = 100`, `n ∈ {100, 500, 1000}`, `p ∈ {3, 10}`,
    /// both marginals, multi-kernel plus every single kernel.
    pub fn desk() -> Self {
        Self::with_dims(&[3, 10], vec![100, 500, 1000], 100)
    }

    /// Full-scale study: `R = 1000`, `n` from 100 to 2000, `p ∈ {3, 50}`.
    pub fn full() -> Self {
        Self::with_dims(&[3, 50], vec![100, 500, 1000, 2000], 1000)
    }

    fn with_dims(ps: &[usize], n_values: Vec<usize>, replications: usize) -> Self {
        let scenarios = ps
            .iter()
            .flat_map(|&p| [Marginal::Gaussian, Marginal::T5].map(|m| ScenarioTemplate::new(p, m)))
            .collect();
        Self {
            scenarios,
            n_values,
            replications,
            methods: all_methods(DEFAULT_KERNELS),
            base_seed: 0,
            kernels: DEFAULT_KERNELS,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: StudyGrid =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("grid: {e}")))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.replications < 1 {
            return bad("replications: must be at least 1".into());
        }
        if self.scenarios.is_empty() {
            return bad("scenarios: at least one scenario is required".into());
        }
        if self.n_values.is_empty() {
            return bad("n_values: at least one sample size is required".into());
        }
        if self.methods.is_empty() {
            return bad("methods: at least one method is required".into());
        }
        if self.kernels < 1 {
            return bad("kernels: must be at least 1".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if let Method::Single(h) = m {
                if *h < 1 || *h > self.kernels {
                    return bad(format!(
                        "methods[{i}]: kernel {h} outside 1..={}",
                        self.kernels
                    ));
                }
            }
        }
        let mut labels = std::collections::BTreeSet::new();
        for (s, sc) in self.scenarios.iter().enumerate() {
            if !labels.insert(sc.label()) {
                return bad(format!("scenarios[{s}]: duplicate id \"{}\"", sc.label()));
            }
            for &n in &self.n_values {
                sc.config(n, 0).validate().map_err(|e| match e {
                    Error::InvalidConfig(msg) => Error::InvalidConfig(format!("scenarios[{s}].{msg}")),
                    other => other,
                })?;
            }
        }
        Ok(())
    }

    /// Number of rows [`run_study`] produces.
    pub fn row_count(&self) -> usize {
        self.scenarios.len() * self.n_values.len() * self.replications * self.methods.len()
    }
}

/// Outcome of one method on one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub scenario_id: String,
    pub n: usize,
    pub p: usize,
    pub marginal: Marginal,
    pub method: Method,
    pub replicate: usize,
    pub d_index: Option<f64>,
    pub v_gap: Option<f64>,
    /// `ok`, or `error: <message>`.
    pub status: String,
    pub seconds: Option<f64>,
}

impl StudyRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug, Default)]
pub struct StudyOptions {
    /// Worker threads; 0 or 1 runs on the calling thread.
    pub workers: usize,
    /// Fill the `seconds` column. Timings vary between runs.
    pub record_time: bool,
}

struct Task {
    scenario: usize,
    n: usize,
    replicate: usize,
}

fn evaluate(method: Method, sim: &SimulatedDataset, lc: &LocalCovariances) -> Result<(f64, Option<f64>)> {
    let est = match method {
        Method::Multi => lc.estimate()?,
        Method::Single(h) => lc.estimate_with(&[h])?,
    };
    let d = d_index(&sim.truth_omega, &est.omega_hat)?;
    Ok((d, gap_report(&est.lambda_hat)?.v_gap))
}

fn run_task(grid: &StudyGrid, task: &Task, record_time: bool) -> Vec<StudyRow> {
    let tmpl = &grid.scenarios[task.scenario];
    let seed = derive_seed(grid.base_seed, task.scenario as u64, task.replicate as u64);
    let start = Instant::now();
    let prepared = gen_dataset(&tmpl.config(task.n, seed)).and_then(|sim| {
        let bank = decile_boundaries(sim.data.locs(), grid.kernels)?;
        let lc = LocalCovariances::compute(&sim.data, &bank)?;
        Ok((sim, lc))
    });
    let shared = start.elapsed().as_secs_f64();

    grid.methods
        .iter()
        .map(|&method| {
            let t = Instant::now();
            let outcome = match &prepared {
                Ok((sim, lc)) => evaluate(method, sim, lc).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            let seconds = record_time.then(|| shared + t.elapsed().as_secs_f64());
            let (d_index, v_gap, status) = match outcome {
                Ok((d, v)) => (Some(d), v, "ok".to_string()),
                Err(e) => (None, None, format!("error: {e}")),
            };
            StudyRow {
                scenario_id: tmpl.label(),
                n: task.n,
                p: tmpl.p,
                marginal: tmpl.marginal,
                method,
                replicate: task.replicate,
                d_index,
                v_gap,
                status,
                seconds,
            }
        })
        .collect()
}

/// Runs every replicate of the grid. Failed replicates are recorded in their
/// rows and the study carries on.
///
/// Rows are ordered by scenario, `n`, replicate and method, whatever the
/// worker count.
pub fn run_study(grid: &StudyGrid, opts: &StudyOptions) -> Result<Vec<StudyRow>> {
    grid.validate()?;
    let mut tasks = Vec::new();
    for scenario in 0..grid.scenarios.len() {
        for &n in &grid.n_values {
            for replicate in 0..grid.replications {
                tasks.push(Task { scenario, n, replicate });
            }
        }
    }
    let nested: Vec<Vec<StudyRow>> = if opts.workers <= 1 {
        tasks.iter().map(|t| run_task(grid, t, opts.record_time)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("workers: {e}")))?;
        pool.install(|| {
            tasks
                .par_iter()
                .map(|t| run_task(grid, t, opts.record_time))
                .collect()
        })
    };
    Ok(nested.into_iter().flatten().collect())
}

/// Boxplot statistics of `D` for one (scenario, n, method) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub scenario_id: String,
    pub n: usize,
    pub p: usize,
    pub marginal: Marginal,
    pub method: Method,
    /// Successful replicates.
    pub count: usize,
    pub failures: usize,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    pub median_v_gap: Option<f64>,
}

/// Quantile of sorted data with linear interpolation between order
/// statistics, at position `q·(len−1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Per-cell statistics; failed rows are counted but excluded from quantiles.
/// Cells appear in order of first occurrence.
pub fn summarize(rows: &[StudyRow]) -> Vec<CellSummary> {
    let mut keys: Vec<(String, usize, Method)> = Vec::new();
    let mut groups: Vec<Vec<&StudyRow>> = Vec::new();
    for row in rows {
        let key = (row.scenario_id.clone(), row.n, row.method);
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(row),
            None => {
                keys.push(key);
                groups.push(vec![row]);
            }
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let first = g[0];
            let mut d: Vec<f64> = g.iter().filter(|r| r.is_ok()).filter_map(|r| r.d_index).collect();
            d.sort_by(f64::total_cmp);
            let mut v: Vec<f64> = g.iter().filter(|r| r.is_ok()).filter_map(|r| r.v_gap).collect();
            v.sort_by(f64::total_cmp);
            let count = d.len();
            CellSummary {
                scenario_id: first.scenario_id.clone(),
                n: first.n,
                p: first.p,
                marginal: first.marginal,
                method: first.method,
                count,
                failures: g.len() - count,
                min: d.first().copied(),
                q1: quantile_sorted(&d, 0.25),
                median: quantile_sorted(&d, 0.5),
                q3: quantile_sorted(&d, 0.75),
                max: d.last().copied(),
                mean: (count > 0).then(|| d.iter().sum::<f64>() / count as f64),
                median_v_gap: quantile_sorted(&v, 0.5),
            }
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(crate::dataio::format_f64).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const STUDY_COLUMNS: [&str; 10] = [
    "scenario_id", "n", "p", "marginal", "method", "replicate", "d_index", "v_gap", "status", "seconds",
];

pub const SUMMARY_COLUMNS: [&str; 14] = [
    "scenario_id", "n", "p", "marginal", "method", "count", "failures", "min", "q1", "median", "q3",
    "max", "mean", "median_v_gap",
];

pub fn write_study_csv(path: &Path, rows: &[StudyRow]) -> Result<()> {
    write_csv(
        path,
        &STUDY_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.scenario_id.clone(),
                r.n.to_string(),
                r.p.to_string(),
                r.marginal.as_str().to_string(),
                r.method.to_string(),
                r.replicate.to_string(),
                opt(r.d_index),
                opt(r.v_gap),
                r.status.clone(),
                opt(r.seconds),
            ]
        }),
    )
}

pub fn write_summary_csv(path: &Path, cells: &[CellSummary]) -> Result<()> {
    write_csv(
        path,
        &SUMMARY_COLUMNS,
        cells.iter().map(|c| {
            vec![
                c.scenario_id.clone(),
                c.n.to_string(),
                c.p.to_string(),
                c.marginal.as_str().to_string(),
                c.method.to_string(),
                c.count.to_string(),
                c.failures.to_string(),
                opt(c.min),
                opt(c.q1),
                opt(c.median),
                opt(c.q3),
                opt(c.max),
                opt(c.mean),
                opt(c.median_v_gap),
            ]
        }),
    )
}

/// Reads a `study.csv` back into rows.
pub fn read_study_csv(path: &Path) -> Result<Vec<StudyRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let header = rdr.headers().map_err(|e| Error::parse(path, e.to_string()))?.clone();
    if header.iter().ne(STUDY_COLUMNS) {
        return Err(Error::parse(path, "unexpected study.csv header"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let bad = |what: &str| Error::parse(path, format!("row {}: bad {what}", i + 1));
        let num = |j: usize| -> Result<Option<f64>> {
            match &rec[j] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(STUDY_COLUMNS[j])),
            }
        };
        let int = |j: usize| rec[j].parse::<usize>().map_err(|_| bad(STUDY_COLUMNS[j]));
        let marginal = match &rec[3] {
            "gaussian" => Marginal::Gaussian,
            "t5" => Marginal::T5,
            _ => return Err(bad("marginal")),
        };
        out.push(StudyRow {
            scenario_id: rec[0].to_string(),
            n: int(1)?,
            p: int(2)?,
            marginal,
            method: rec[4].parse().map_err(|_| bad("method"))?,
            replicate: int(5)?,
            d_index: num(6)?,
            v_gap: num(7)?,
            status: rec[8].to_string(),
            seconds: num(9)?,
        });
    }
    Ok(out)
}
