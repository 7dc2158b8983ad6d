use serde::Serialize;

use crate::error::Result;
use crate::estimation::PolicyBounds;
use crate::model::Policy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundMode {
    Exploring,
    Committed,
    /// Baseline rounds chosen by the learner's own rule.
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub t: u64,
    pub w: usize,
    pub z: usize,
    pub x: usize,
    pub y: f64,
    pub mode: RoundMode,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseEvent {
    /// REC: deploy this recommendation policy for the rest of the run.
    Commit { policy: Policy },
    /// TRT: stop exploring and output this treatment policy.
    Stop { policy: Policy },
    /// RECERT: structural certificate issued for this treatment policy.
    StructuralDeploy { policy: Policy },
}

/// Snapshot taken at a check round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub r: u32,
    pub t: u64,
    pub certified: Vec<bool>,
    /// Bounds for the objective's own policy class, aligned with the
    /// lexicographic enumeration of that class.
    pub bounds: PolicyBounds,
    /// RECERT's parallel structural bounds.
    pub structural_bounds: Option<PolicyBounds>,
    pub events: Vec<PhaseEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum StructuralVerdict {
    Deploy { policy: Policy },
    Abstain,
}

/// Final output of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunOutcome {
    /// Recommendation policy deployed at the end (None = abstain).
    pub rec_policy: Option<Policy>,
    /// Treatment policy output for direct assignment (None = abstain).
    pub trt_policy: Option<Policy>,
    /// Round of the REC commit or the TRT stop.
    pub commit_time: Option<u64>,
    pub rounds_played: u64,
    pub structural_verdict: Option<StructuralVerdict>,
    /// Treatment policy favoured by the plug-in estimate (RECERT diagnostics).
    pub structural_candidate: Option<Policy>,
    /// Last displayed structural bounds (INF) or frozen structural bounds (RECERT).
    pub final_structural_bounds: Option<PolicyBounds>,
    pub final_certified: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTrace {
    pub algorithm: String,
    pub scenario: String,
    pub horizon: u64,
    pub delta: f64,
    #[serde(skip)]
    pub rounds: Vec<RoundRecord>,
    pub phases: Vec<PhaseRecord>,
    pub outcome: RunOutcome,
}

impl RunTrace {
    pub fn new(algorithm: &str, scenario: &str, horizon: u64, delta: f64) -> Self {
        RunTrace {
            algorithm: algorithm.to_string(),
            scenario: scenario.to_string(),
            horizon,
            delta,
            rounds: Vec::with_capacity(horizon as usize),
            phases: Vec::new(),
            outcome: RunOutcome::default(),
        }
    }

    /// One JSON object per phase followed by a summary object.
    pub fn to_jsonl(&self, seed: u64) -> Result<String> {
        #[derive(Serialize)]
        struct PhaseLine<'a> {
            kind: &'static str,
            scenario: &'a str,
            algorithm: &'a str,
            seed: u64,
            #[serde(flatten)]
            phase: &'a PhaseRecord,
        }
        #[derive(Serialize)]
        struct SummaryLine<'a> {
            kind: &'static str,
            scenario: &'a str,
            algorithm: &'a str,
            seed: u64,
            horizon: u64,
            delta: f64,
            #[serde(flatten)]
            outcome: &'a RunOutcome,
        }
        let mut out = String::new();
        for phase in &self.phases {
            out.push_str(&serde_json::to_string(&PhaseLine {
                kind: "phase",
                scenario: &self.scenario,
                algorithm: &self.algorithm,
                seed,
                phase,
            })?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&SummaryLine {
            kind: "summary",
            scenario: &self.scenario,
            algorithm: &self.algorithm,
            seed,
            horizon: self.horizon,
            delta: self.delta,
            outcome: &self.outcome,
        })?);
        out.push('\n');
        Ok(out)
    }
}
