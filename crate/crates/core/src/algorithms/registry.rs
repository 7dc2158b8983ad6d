use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use super::brace::{run_brace, run_brace_fast, run_brace_partial, run_recert, Objective};
use super::trace::RunTrace;
use crate::baselines::{run_2sls, run_actual_ucb, run_chosen_ucb, run_comply_ucb, run_thompson, TslsSchedule};
use crate::error::{BraceError, Result};
use crate::model::Environment;

/// Which figure group an algorithm's metrics belong to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    Rec,
    Trt,
    Inf,
    Recert,
}

impl Track {
    pub fn as_str(self) -> &'static str {
        match self {
            Track::Rec => "rec",
            Track::Trt => "trt",
            Track::Inf => "inf",
            Track::Recert => "recert",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    BraceRec,
    BraceRecFast,
    BraceTrt,
    BraceTrtFast,
    BraceTrtPartial,
    BraceInf,
    BraceInfPartial,
    Recert,
    ChosenUcb,
    ActualUcb,
    ComplyUcb,
    Thompson,
    TslsEpsilonDecay,
    TslsFixed,
    TslsAdaptive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 15] = [
        Algorithm::BraceRec,
        Algorithm::BraceRecFast,
        Algorithm::BraceTrt,
        Algorithm::BraceTrtFast,
        Algorithm::BraceTrtPartial,
        Algorithm::BraceInf,
        Algorithm::BraceInfPartial,
        Algorithm::Recert,
        Algorithm::ChosenUcb,
        Algorithm::ActualUcb,
        Algorithm::ComplyUcb,
        Algorithm::Thompson,
        Algorithm::TslsEpsilonDecay,
        Algorithm::TslsFixed,
        Algorithm::TslsAdaptive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::BraceRec => "brace_rec",
            Algorithm::BraceRecFast => "brace_rec_fast",
            Algorithm::BraceTrt => "brace_trt",
            Algorithm::BraceTrtFast => "brace_trt_fast",
            Algorithm::BraceTrtPartial => "brace_trt_partial",
            Algorithm::BraceInf => "brace_inf",
            Algorithm::BraceInfPartial => "brace_inf_partial",
            Algorithm::Recert => "recert",
            Algorithm::ChosenUcb => "chosen_ucb",
            Algorithm::ActualUcb => "actual_ucb",
            Algorithm::ComplyUcb => "comply_ucb",
            Algorithm::Thompson => "thompson",
            Algorithm::TslsEpsilonDecay => "tsls_epsilon_decay",
            Algorithm::TslsFixed => "tsls_fixed",
            Algorithm::TslsAdaptive => "tsls_adaptive",
        }
    }

    pub fn track(self) -> Track {
        match self {
            Algorithm::BraceRec
            | Algorithm::BraceRecFast
            | Algorithm::ChosenUcb
            | Algorithm::ActualUcb
            | Algorithm::ComplyUcb
            | Algorithm::Thompson => Track::Rec,
            Algorithm::BraceTrt
            | Algorithm::BraceTrtFast
            | Algorithm::BraceTrtPartial
            | Algorithm::TslsEpsilonDecay
            | Algorithm::TslsFixed
            | Algorithm::TslsAdaptive => Track::Trt,
            Algorithm::BraceInf | Algorithm::BraceInfPartial => Track::Inf,
            Algorithm::Recert => Track::Recert,
        }
    }

    /// BRACE variants may abstain; baselines always output a policy.
    pub fn is_brace(self) -> bool {
        matches!(
            self,
            Algorithm::BraceRec
                | Algorithm::BraceRecFast
                | Algorithm::BraceTrt
                | Algorithm::BraceTrtFast
                | Algorithm::BraceTrtPartial
                | Algorithm::BraceInf
                | Algorithm::BraceInfPartial
                | Algorithm::Recert
        )
    }

    /// Reason the algorithm cannot run on `env`, if any.
    pub fn incompatibility(self, env: &Environment) -> Option<String> {
        let structural = matches!(self.track(), Track::Trt | Track::Inf);
        (structural && env.num_recommendations() < env.num_treatments())
            .then(|| format!("{} needs K_z >= K_x", self.as_str()))
    }

    pub fn run<R: Rng + ?Sized>(self, env: &Environment, horizon: u64, delta: f64, rng: &mut R) -> Result<RunTrace> {
        let mut trace = match self {
            Algorithm::BraceRec => run_brace(Objective::Rec, env, horizon, delta, rng)?,
            Algorithm::BraceRecFast => run_brace_fast(Objective::Rec, env, horizon, delta, rng)?,
            Algorithm::BraceTrt => run_brace(Objective::Trt, env, horizon, delta, rng)?,
            Algorithm::BraceTrtFast => run_brace_fast(Objective::Trt, env, horizon, delta, rng)?,
            Algorithm::BraceTrtPartial => run_brace_partial(Objective::Trt, env, horizon, delta, rng)?,
            Algorithm::BraceInf => run_brace(Objective::Inf, env, horizon, delta, rng)?,
            Algorithm::BraceInfPartial => run_brace_partial(Objective::Inf, env, horizon, delta, rng)?,
            Algorithm::Recert => run_recert(env, horizon, delta, rng)?,
            Algorithm::ChosenUcb => run_chosen_ucb(env, horizon, rng),
            Algorithm::ActualUcb => run_actual_ucb(env, horizon, rng),
            Algorithm::ComplyUcb => run_comply_ucb(env, horizon, rng),
            Algorithm::Thompson => run_thompson(env, horizon, rng),
            Algorithm::TslsEpsilonDecay => run_2sls(TslsSchedule::EpsilonDecay, env, horizon, rng)?,
            Algorithm::TslsFixed => run_2sls(TslsSchedule::Fixed, env, horizon, rng)?,
            Algorithm::TslsAdaptive => run_2sls(TslsSchedule::Adaptive, env, horizon, rng)?,
        };
        trace.delta = delta;
        Ok(trace)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = BraceError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| BraceError::UnknownAlgorithm {
            name: s.to_string(),
            valid: Algorithm::ALL.map(Algorithm::as_str).join(", "),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!(matches!("nope".parse::<Algorithm>(), Err(BraceError::UnknownAlgorithm { .. })));
    }
}
