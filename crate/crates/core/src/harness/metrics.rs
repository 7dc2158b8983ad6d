use serde::Serialize;

use crate::algorithms::{Algorithm, RunTrace, StructuralVerdict, Track};
use crate::error::Result;
use crate::model::{diagnostics, enumerate_policies, ActionSpace, Environment, Policy};

/// Two values are treated as equal policy values within this tolerance.
pub const VALUE_TOL: f64 = 1e-12;

/// Summary of one (scenario, algorithm, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub algorithm: String,
    pub seed: u64,
    pub horizon: u64,
    pub delta: f64,
    pub track: Track,
    /// `Σ_t max_z g_z(W_t) − g_{Z_t}(W_t)` over the rounds actually played.
    pub operational_regret: f64,
    /// True value of the output policy under the track's objective.
    pub estimated_primary_value: Option<f64>,
    pub rec_value: Option<f64>,
    pub trt_value: Option<f64>,
    pub abstained: bool,
    pub wrong_nonabstain: bool,
    pub coverage_ok: Option<bool>,
    pub final_interval_width: Option<f64>,
    pub certified_share: Option<f64>,
    pub commit_time: Option<u64>,
    /// RECERT only.
    pub structural_abstained: Option<bool>,
    /// RECERT only: true structural value of the plug-in favourite.
    pub structural_estimate: Option<f64>,
}

fn value(env: &Environment, policy: Option<&Policy>) -> Result<Option<f64>> {
    policy.map(|p| env.policy_value(p)).transpose()
}

fn policy_index(policies: &[Policy], target: &Policy) -> usize {
    policies.iter().position(|p| p == target).expect("optimum is enumerated")
}

pub fn compute_metrics(env: &Environment, algorithm: Algorithm, seed: u64, trace: &RunTrace) -> Result<MetricsRow> {
    let diag = diagnostics(env)?;
    let track = algorithm.track();

    let g: Vec<Vec<f64>> = (0..env.num_contexts()).map(|w| env.itt_means(w).as_slice().to_vec()).collect();
    let best: Vec<f64> = g.iter().map(|gw| gw.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let operational_regret = trace.rounds.iter().map(|r| best[r.w] - g[r.w][r.z]).sum();

    let out = &trace.outcome;
    let rec_value = value(env, out.rec_policy.as_ref())?;
    let trt_value = value(env, out.trt_policy.as_ref())?;
    let below = |v: Option<f64>, opt: f64| v.is_some_and(|v| v < opt - VALUE_TOL);

    let trt_policies = enumerate_policies(env.num_contexts(), env.num_treatments(), ActionSpace::Trt)?;
    let opt_index = policy_index(&trt_policies, &diag.str_opt);
    let opt_width = |bounds: Option<&crate::estimation::PolicyBounds>| bounds.map(|b| b.width(opt_index));

    let mut row = MetricsRow {
        scenario: env.name().to_string(),
        algorithm: algorithm.as_str().to_string(),
        seed,
        horizon: trace.horizon,
        delta: trace.delta,
        track,
        operational_regret,
        estimated_primary_value: None,
        rec_value,
        trt_value,
        abstained: false,
        wrong_nonabstain: false,
        coverage_ok: None,
        final_interval_width: None,
        certified_share: None,
        commit_time: out.commit_time,
        structural_abstained: None,
        structural_estimate: None,
    };
    if algorithm.is_brace() && !out.final_certified.is_empty() {
        let n = out.final_certified.len() as f64;
        row.certified_share = Some(out.final_certified.iter().filter(|&&c| c).count() as f64 / n);
    }

    match track {
        Track::Rec => {
            row.estimated_primary_value = rec_value;
            row.abstained = rec_value.is_none();
            row.wrong_nonabstain = below(rec_value, diag.rec_opt_value);
        }
        Track::Trt => {
            row.estimated_primary_value = trt_value;
            row.abstained = trt_value.is_none();
            row.wrong_nonabstain = below(trt_value, diag.str_opt_value);
        }
        Track::Inf => {
            let truth: Vec<f64> = trt_policies.iter().map(|p| env.policy_value(p)).collect::<Result<_>>()?;
            let covered = trace
                .phases
                .iter()
                .all(|ph| truth.iter().enumerate().all(|(i, &v)| ph.bounds.covers(i, v)));
            row.coverage_ok = Some(covered);
            row.final_interval_width = opt_width(out.final_structural_bounds.as_ref());
        }
        Track::Recert => {
            row.estimated_primary_value = rec_value;
            row.abstained = rec_value.is_none();
            let deployed = match &out.structural_verdict {
                Some(StructuralVerdict::Deploy { policy }) => Some(env.policy_value(policy)?),
                _ => None,
            };
            row.structural_abstained = Some(deployed.is_none());
            row.wrong_nonabstain = below(deployed, diag.str_opt_value);
            row.final_interval_width = opt_width(out.final_structural_bounds.as_ref());
            row.structural_estimate = value(env, out.structural_candidate.as_ref())?;
        }
    }
    Ok(row)
}

impl MetricsRow {
    /// `(metric, value)` pairs in a fixed order; absent fields are omitted and
    /// booleans are written as 0/1.
    pub fn long_values(&self) -> Vec<(&'static str, f64)> {
        let b = |v: bool| f64::from(u8::from(v));
        let mut out = vec![("operational_regret", self.operational_regret)];
        let mut opt = |name: &'static str, v: Option<f64>| {
            if let Some(v) = v {
                out.push((name, v));
            }
        };
        opt("estimated_primary_value", self.estimated_primary_value);
        opt("rec_value", self.rec_value);
        opt("trt_value", self.trt_value);
        if self.track != Track::Inf {
            opt("abstained", Some(b(self.abstained)));
            opt("wrong_nonabstain", Some(b(self.wrong_nonabstain)));
        }
        opt("coverage_ok", self.coverage_ok.map(b));
        opt("final_interval_width", self.final_interval_width);
        opt("certified_share", self.certified_share);
        opt("commit_time", self.commit_time.map(|t| t as f64));
        opt("structural_abstained", self.structural_abstained.map(b));
        opt("structural_estimate", self.structural_estimate);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{RoundMode, RoundRecord};
    use crate::scenarios::Scenario;

    #[test]
    fn regret_uses_oracle_means() {
        let env = Scenario::WorkflowRedesign.build();
        let mut trace = RunTrace::new("chosen_ucb", env.name(), 3, 0.05);
        for (t, z) in [(1, 0), (2, 1), (3, 0)] {
            trace.rounds.push(RoundRecord { t, w: 0, z, x: 0, y: 0.0, mode: RoundMode::Adaptive });
        }
        trace.outcome.rec_policy = Some(Policy::new(ActionSpace::Rec, vec![0]));
        let row = compute_metrics(&env, Algorithm::ChosenUcb, 0, &trace).unwrap();
        assert!((row.operational_regret - 2.0 * 0.69).abs() < 1e-12);
        assert!(row.wrong_nonabstain && !row.abstained);
        assert_eq!(row.estimated_primary_value, Some(0.0));
    }

    #[test]
    fn abstention_is_not_wrong() {
        let env = Scenario::WeakIvSmallGap.build();
        let trace = RunTrace::new("brace_trt", env.name(), 0, 0.05);
        let row = compute_metrics(&env, Algorithm::BraceTrt, 0, &trace).unwrap();
        assert!(row.abstained && !row.wrong_nonabstain);
        assert_eq!(row.operational_regret, 0.0);
        let names: Vec<_> = row.long_values().into_iter().map(|(n, _)| n).collect();
        assert!(!names.contains(&"coverage_ok") && names.contains(&"abstained"));
    }
}
