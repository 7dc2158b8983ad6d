use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{compute_metrics, MetricsRow};
use crate::algorithms::{Algorithm, RunTrace};
use crate::error::{contract, Result};
use crate::model::Environment;
use crate::scenarios::Scenario;

/// Generator seed: the first eight bytes (little endian) of
/// `SHA-256(scenario 0x1f stream 0x1f seed)`.
pub fn cell_seed(scenario: &str, stream: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(scenario.as_bytes());
    h.update([0x1f]);
    h.update(stream.as_bytes());
    h.update([0x1f]);
    h.update(seed.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Stream shared by every algorithm of a (scenario, seed) cell, so that
/// comparisons across algorithms are paired (common random numbers).
pub const RUN_STREAM: &str = "run";

/// ChaCha8 is the only generator used by the harness.
pub fn cell_rng(scenario: &str, stream: &str, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cell_seed(scenario, stream, seed))
}

#[derive(Clone, Debug)]
pub enum CellOutcome {
    Completed { row: MetricsRow, trace: RunTrace },
    Skipped { reason: String },
}

/// Run one cell on an explicit environment.
pub fn run_cell_env(env: &Environment, algorithm: Algorithm, seed: u64, horizon: u64, delta: f64) -> Result<CellOutcome> {
    if let Some(reason) = algorithm.incompatibility(env) {
        return Ok(CellOutcome::Skipped { reason });
    }
    let mut rng = cell_rng(env.name(), RUN_STREAM, seed);
    let trace = algorithm.run(env, horizon, delta, &mut rng)?;
    if !algorithm.is_brace() && (trace.outcome.rec_policy.is_none() || trace.outcome.trt_policy.is_none()) {
        return Err(contract(format!("baseline {algorithm} returned without a policy")));
    }
    let row = compute_metrics(env, algorithm, seed, &trace)?;
    Ok(CellOutcome::Completed { row, trace })
}

pub fn run_cell(scenario: Scenario, algorithm: Algorithm, seed: u64, horizon: u64, delta: f64) -> Result<CellOutcome> {
    run_cell_env(&scenario.build(), algorithm, seed, horizon, delta)
}

/// Suite grid. Names may be `"all"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub scenarios: Vec<String>,
    pub algorithms: Vec<String>,
    /// Seeds `0..seeds`.
    pub seeds: u64,
    /// Overrides every scenario's default horizon.
    pub horizon: Option<u64>,
    pub delta: f64,
    /// Output directory for CSV and JSONL files.
    pub out: Option<String>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            scenarios: vec!["all".into()],
            algorithms: vec!["all".into()],
            seeds: 10,
            horizon: None,
            delta: 0.05,
            out: None,
        }
    }
}

impl SuiteConfig {
    pub fn resolve_scenarios(&self) -> Result<Vec<Scenario>> {
        let mut out = Vec::new();
        for name in &self.scenarios {
            if name == "all" {
                out.extend(Scenario::ALL);
            } else {
                out.push(name.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn resolve_algorithms(&self) -> Result<Vec<Algorithm>> {
        let mut out = Vec::new();
        for name in &self.algorithms {
            if name == "all" {
                out.extend(Algorithm::ALL);
            } else {
                out.push(name.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CellKey {
    pub scenario: Scenario,
    pub algorithm: Algorithm,
    pub seed: u64,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteResults {
    pub rows: Vec<MetricsRow>,
    /// JSONL per completed cell, in cell order.
    pub traces: Vec<String>,
    pub skipped: Vec<(CellKey, String)>,
    pub failures: Vec<(CellKey, String)>,
}

pub fn run_suite(config: &SuiteConfig) -> Result<SuiteResults> {
    let scenarios = config.resolve_scenarios()?;
    let algorithms = config.resolve_algorithms()?;
    let mut keys = Vec::new();
    for &scenario in &scenarios {
        for &algorithm in &algorithms {
            for seed in 0..config.seeds {
                keys.push(CellKey { scenario, algorithm, seed });
            }
        }
    }
    let outcomes: Vec<(CellKey, Result<CellOutcome>)> = keys
        .into_par_iter()
        .map(|key| {
            let horizon = config.horizon.unwrap_or(key.scenario.default_horizon() as u64);
            let out = run_cell(key.scenario, key.algorithm, key.seed, horizon, config.delta);
            (key, out)
        })
        .collect();

    let mut results = SuiteResults::default();
    for (key, out) in outcomes {
        match out {
            Ok(CellOutcome::Completed { row, trace }) => {
                results.traces.push(trace.to_jsonl(key.seed)?);
                results.rows.push(row);
            }
            Ok(CellOutcome::Skipped { reason }) => results.skipped.push((key, reason)),
            Err(e) => results.failures.push((key, e.to_string())),
        }
    }
    Ok(results)
}

/// One long-format CSV record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub scenario: String,
    pub algorithm: String,
    pub seed: u64,
    pub horizon: u64,
    pub delta: f64,
    pub metric: String,
    pub value: f64,
}

pub fn long_rows(rows: &[MetricsRow]) -> Vec<LongRow> {
    rows.iter()
        .flat_map(|r| {
            r.long_values().into_iter().map(move |(metric, value)| LongRow {
                scenario: r.scenario.clone(),
                algorithm: r.algorithm.clone(),
                seed: r.seed,
                horizon: r.horizon,
                delta: r.delta,
                metric: metric.to_string(),
                value,
            })
        })
        .collect()
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const SKIPPED_FILE: &str = "skipped.csv";

pub fn write_long_csv(rows: &[LongRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["scenario", "algorithm", "seed", "horizon", "delta", "metric", "value"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_long_csv(path: &Path) -> Result<Vec<LongRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Write `metrics.csv`, `traces.jsonl` and `skipped.csv` into `dir`.
pub fn write_outputs(results: &SuiteResults, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_long_csv(&long_rows(&results.rows), &dir.join(METRICS_FILE))?;
    fs::write(dir.join(TRACES_FILE), results.traces.concat())?;
    let mut w = csv::Writer::from_path(dir.join(SKIPPED_FILE))?;
    w.write_record(["scenario", "algorithm", "seed", "status", "reason"])?;
    for (status, list) in [("skipped", &results.skipped), ("failed", &results.failures)] {
        for (key, reason) in list {
            let seed = key.seed.to_string();
            w.write_record([key.scenario.as_str(), key.algorithm.as_str(), seed.as_str(), status, reason.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}
