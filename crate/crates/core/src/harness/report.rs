use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::runner::LongRow;
use crate::algorithms::{Algorithm, Track};
use crate::error::Result;
use crate::model::{diagnostics, enumerate_policies, ActionSpace, Environment};
use crate::scenarios::{verify_scenario, Scenario, VerificationReport};

/// Mean of one metric over the seeds of a (scenario, algorithm) pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub track: String,
    pub scenario: String,
    pub algorithm: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
}

fn track_of(algorithm: &str) -> String {
    algorithm.parse::<Algorithm>().map(|a| a.track().as_str().to_string()).unwrap_or_else(|_| "other".into())
}

/// Group by (track, scenario, algorithm, metric), sorted by that key.
pub fn aggregate(rows: &[LongRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, String, String, String), (usize, f64)> = BTreeMap::new();
    for r in rows {
        let key = (track_of(&r.algorithm), r.scenario.clone(), r.algorithm.clone(), r.metric.clone());
        let e = groups.entry(key).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += r.value;
    }
    groups
        .into_iter()
        .map(|((track, scenario, algorithm, metric), (n, sum))| AggregateRow {
            track,
            scenario,
            algorithm,
            metric,
            n,
            mean: sum / n as f64,
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["track", "scenario", "algorithm", "metric", "n", "mean"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Metrics shown in the console summary, per track.
pub fn summary_metrics(track: Track) -> &'static [&'static str] {
    match track {
        Track::Rec => &["estimated_primary_value", "operational_regret", "abstained"],
        Track::Trt => &["estimated_primary_value", "abstained", "wrong_nonabstain"],
        Track::Inf => &["coverage_ok", "certified_share", "final_interval_width"],
        Track::Recert => &["rec_value", "structural_abstained", "final_interval_width"],
    }
}

/// Plain-text table grouped by track.
pub fn summary_table(rows: &[LongRow]) -> String {
    let agg = aggregate(rows);
    let mut out = String::new();
    for track in [Track::Rec, Track::Trt, Track::Inf, Track::Recert] {
        let metrics = summary_metrics(track);
        let mut cells: BTreeMap<(String, String), Vec<Option<f64>>> = BTreeMap::new();
        for a in agg.iter().filter(|a| a.track == track.as_str()) {
            if let Some(i) = metrics.iter().position(|m| *m == a.metric) {
                cells.entry((a.scenario.clone(), a.algorithm.clone())).or_insert_with(|| vec![None; metrics.len()])[i] =
                    Some(a.mean);
            }
        }
        if cells.is_empty() {
            continue;
        }
        let _ = writeln!(out, "[{} track]", track.as_str());
        let _ = write!(out, "{:<24}{:<20}", "scenario", "algorithm");
        for m in metrics {
            let _ = write!(out, "{m:>26}");
        }
        out.push('\n');
        for ((scenario, algorithm), values) in cells {
            let _ = write!(out, "{scenario:<24}{algorithm:<20}");
            for v in values {
                match v {
                    Some(v) => {
                        let _ = write!(out, "{v:>26.4}");
                    }
                    None => {
                        let _ = write!(out, "{:>26}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PolicyValueRow {
    pub space: ActionSpace,
    pub assignment: Vec<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContextReport {
    pub w: usize,
    pub nu: f64,
    pub compliance: Vec<Vec<f64>>,
    pub itt: Vec<f64>,
    pub structural: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub scenario: String,
    pub contexts: Vec<ContextReport>,
    pub policies: Vec<PolicyValueRow>,
    pub diagnostics: crate::model::EnvDiagnostics,
    pub verification: VerificationReport,
}

pub fn oracle_report(scenario: Scenario) -> Result<OracleReport> {
    let env = scenario.build();
    oracle_report_env(&env, Some(scenario))
}

pub fn oracle_report_env(env: &Environment, scenario: Option<Scenario>) -> Result<OracleReport> {
    let contexts = (0..env.num_contexts())
        .map(|w| {
            let p = env.compliance_matrix(w);
            ContextReport {
                w,
                nu: env.context_probs()[w],
                compliance: p.row_iter().map(|r| r.iter().copied().collect()).collect(),
                itt: env.itt_means(w).as_slice().to_vec(),
                structural: env.structural_means(w).as_slice().to_vec(),
            }
        })
        .collect();
    let mut policies = Vec::new();
    for space in [ActionSpace::Rec, ActionSpace::Trt] {
        for p in enumerate_policies(env.num_contexts(), env.num_actions(space), space)? {
            let value = env.policy_value(&p)?;
            policies.push(PolicyValueRow { space, assignment: p.assignment, value });
        }
    }
    let verification = match scenario {
        Some(s) => verify_scenario(env, &s.spec())?,
        None => VerificationReport { scenario: env.name().to_string(), entries: Vec::new() },
    };
    Ok(OracleReport {
        scenario: env.name().to_string(),
        contexts,
        policies,
        diagnostics: diagnostics(env)?,
        verification,
    })
}

impl OracleReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.scenario);
        for c in &self.contexts {
            let _ = writeln!(out, "context {} (nu = {:.4})", c.w, c.nu);
            for (z, row) in c.compliance.iter().enumerate() {
                let _ = writeln!(out, "  P[{z}] = {row:?}   g[{z}] = {:.4}", c.itt[z]);
            }
            let _ = writeln!(out, "  mu = {:?}", c.structural);
        }
        let _ = writeln!(out, "policies:");
        for p in &self.policies {
            let _ = writeln!(out, "  {:?} {:?} -> {:.6}", p.space, p.assignment, p.value);
        }
        let d = &self.diagnostics;
        let _ = writeln!(
            out,
            "best REC {:.6} (gap {:.6}); best TRT {:.6} (gap {:.6})",
            d.rec_opt_value, d.rec_gap, d.str_opt_value, d.str_gap
        );
        let _ = writeln!(
            out,
            "homogeneous {}; invertible {}; max inverse norm {:?}; identification norm {:?}; nu_min {:.4}",
            d.homogeneous, d.invertible, d.inv_norm_max, d.identification_norm_max, d.nu_min
        );
        for e in &self.verification.entries {
            let _ = writeln!(
                out,
                "  [{}] {} = {:.9} (expected {})",
                if e.pass { "PASS" } else { "FAIL" },
                e.label,
                e.value,
                e.expected
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alg: &str, metric: &str, seed: u64, value: f64) -> LongRow {
        LongRow {
            scenario: "s".into(),
            algorithm: alg.into(),
            seed,
            horizon: 8,
            delta: 0.05,
            metric: metric.into(),
            value,
        }
    }

    #[test]
    fn aggregate_is_recomputable() {
        let rows = vec![row("brace_trt", "abstained", 0, 1.0), row("brace_trt", "abstained", 1, 0.0), row("brace_trt", "abstained", 2, 1.0)];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].track, "trt");
        assert!((agg[0].mean - 2.0 / 3.0).abs() <= 1e-12);
        assert!(summary_table(&rows).contains("[trt track]"));
    }

    #[test]
    fn oracle_report_examples() {
        let r = oracle_report(Scenario::WorkflowRedesign).unwrap();
        assert!(r.verification.passed());
        assert!((r.diagnostics.rec_opt_value - 0.69).abs() < 1e-9);
        assert!((r.diagnostics.str_opt_value - 0.9).abs() < 1e-9);
        let dc = oracle_report(Scenario::DirectControl).unwrap();
        let rec: Vec<f64> = dc.policies.iter().filter(|p| p.space == ActionSpace::Rec).map(|p| p.value).collect();
        let trt: Vec<f64> = dc.policies.iter().filter(|p| p.space == ActionSpace::Trt).map(|p| p.value).collect();
        assert_eq!(rec.len(), trt.len());
        for (a, b) in rec.iter().zip(&trt) {
            assert!((a - b).abs() <= 1e-12);
        }
        let t = oracle_report(Scenario::Tradeoff).unwrap();
        assert!(t.diagnostics.homogeneous);
        assert!(t.to_text().contains("PASS"));
    }
}
