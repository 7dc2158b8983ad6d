//! BRACE: uniform exploration with phase-doubling checks and
//! objective-specific certified intervals.
//!
//! All variants share one loop ([`run_configured`]); they differ in when the
//! separation rule is evaluated, which reward radius is used and how
//! structural local intervals are formed.

use rand::Rng;
use serde::Serialize;

use super::trace::{PhaseEvent, PhaseRecord, RoundMode, RoundRecord, RunTrace, StructuralVerdict};
use crate::error::{contract, Result};
use crate::estimation::{
    plugin_solve, policy_bounds, ContextWeights, Dims, LocalIntervals, PhaseStats, PolicyBounds, Radii,
    RewardRadius, StatsAccumulator, StructuralMode,
};
use crate::model::{argmax, enumerate_policies, ActionSpace, Environment, Policy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Operational recommendation welfare: commit to a recommendation policy.
    Rec,
    /// Structural treatment welfare: stop and output a treatment policy.
    Trt,
    /// Anytime-valid intervals for structural policy values; never stops.
    Inf,
}

impl Objective {
    pub fn space(self) -> ActionSpace {
        match self {
            Objective::Rec => ActionSpace::Rec,
            Objective::Trt | Objective::Inf => ActionSpace::Trt,
        }
    }
}

/// When the separation rule is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckSchedule {
    /// Only at `t = 2^r`.
    PhaseEndpoints,
    /// Every round once each (context, arm) pair could have been seen, with
    /// `r = ⌈log₂ t⌉` in the radii.
    EveryRound,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BraceConfig {
    pub objective: Objective,
    pub schedule: CheckSchedule,
    pub reward_radius: RewardRadius,
    pub structural: StructuralMode,
    pub delta: f64,
    /// Aggregate with the true context marginal instead of `ν̂` and `η`.
    pub known_nu: bool,
    /// Run a parallel structural certificate next to a REC objective.
    pub parallel_structural: bool,
}

impl BraceConfig {
    pub fn base(objective: Objective, delta: f64) -> Self {
        BraceConfig {
            objective,
            schedule: CheckSchedule::PhaseEndpoints,
            reward_radius: RewardRadius::Hoeffding,
            structural: StructuralMode::PointId,
            delta,
            known_nu: false,
            parallel_structural: false,
        }
    }

    pub fn fast(objective: Objective, delta: f64) -> Self {
        BraceConfig {
            schedule: CheckSchedule::EveryRound,
            reward_radius: RewardRadius::Bernstein,
            ..BraceConfig::base(objective, delta)
        }
    }

    pub fn partial(objective: Objective, delta: f64) -> Self {
        BraceConfig { structural: StructuralMode::PartialId, ..BraceConfig::base(objective, delta) }
    }

    pub fn recert(delta: f64) -> Self {
        BraceConfig { parallel_structural: true, ..BraceConfig::base(Objective::Rec, delta) }
    }

    fn algorithm_name(&self) -> &'static str {
        match (self.objective, self.parallel_structural, self.schedule, self.structural) {
            (Objective::Rec, true, _, _) => "recert",
            (Objective::Rec, _, CheckSchedule::EveryRound, _) => "brace_rec_fast",
            (Objective::Rec, _, _, _) => "brace_rec",
            (Objective::Trt, _, CheckSchedule::EveryRound, _) => "brace_trt_fast",
            (Objective::Trt, _, _, StructuralMode::PartialId) => "brace_trt_partial",
            (Objective::Trt, _, _, _) => "brace_trt",
            (Objective::Inf, _, _, StructuralMode::PartialId) => "brace_inf_partial",
            (Objective::Inf, _, _, _) => "brace_inf",
        }
    }
}

/// Index of the unique policy whose LCB strictly exceeds every other
/// policy's UCB.
pub fn stopping_check(bounds: &PolicyBounds) -> Option<usize> {
    if bounds.is_empty() {
        return None;
    }
    let leader = argmax(&bounds.lcb);
    let best_other = bounds
        .ucb
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != leader)
        .map(|(_, &u)| u)
        .fold(f64::NEG_INFINITY, f64::max);
    (bounds.lcb[leader] > best_other).then_some(leader)
}

pub fn run_brace<R: Rng + ?Sized>(
    objective: Objective,
    env: &Environment,
    horizon: u64,
    delta: f64,
    rng: &mut R,
) -> Result<RunTrace> {
    run_configured(&BraceConfig::base(objective, delta), env, horizon, rng)
}

pub fn run_brace_fast<R: Rng + ?Sized>(
    objective: Objective,
    env: &Environment,
    horizon: u64,
    delta: f64,
    rng: &mut R,
) -> Result<RunTrace> {
    if objective == Objective::Inf {
        return Err(contract("the FAST variant supports REC and TRT only"));
    }
    run_configured(&BraceConfig::fast(objective, delta), env, horizon, rng)
}

pub fn run_brace_partial<R: Rng + ?Sized>(
    objective: Objective,
    env: &Environment,
    horizon: u64,
    delta: f64,
    rng: &mut R,
) -> Result<RunTrace> {
    if objective == Objective::Rec {
        return Err(contract("the partial-identification variant supports TRT and INF only"));
    }
    run_configured(&BraceConfig::partial(objective, delta), env, horizon, rng)
}

/// REC deployment with a parallel, stricter structural certificate.
pub fn run_recert<R: Rng + ?Sized>(env: &Environment, horizon: u64, delta: f64, rng: &mut R) -> Result<RunTrace> {
    run_configured(&BraceConfig::recert(delta), env, horizon, rng)
}

struct Checkpoint {
    stats: PhaseStats,
    locals: LocalIntervals,
    radii: Radii,
}

fn checkpoint(acc: &StatsAccumulator, r: u32, cfg: &BraceConfig) -> Result<Checkpoint> {
    let stats = acc.snapshot(r);
    let radii = Radii::compute(&stats, cfg.delta, cfg.reward_radius)?;
    let locals = LocalIntervals::build(&stats, &radii, cfg.structural);
    Ok(Checkpoint { stats, locals, radii })
}

fn aggregate(cp: &Checkpoint, env: &Environment, cfg: &BraceConfig, space: ActionSpace, policies: &[Policy]) -> PolicyBounds {
    let nu_hat = cp.stats.nu_hat();
    let weights = if cfg.known_nu {
        ContextWeights::Known(env.context_probs())
    } else {
        ContextWeights::Estimated { nu_hat: &nu_hat, eta: cp.radii.eta }
    };
    policy_bounds(cp.locals.family(space), weights, space, policies)
}

/// Treatment policy maximizing the clipped plug-in estimate per context;
/// falls back to interval midpoints where `P̂` cannot be inverted.
fn structural_candidate(cp: &Checkpoint) -> Policy {
    let dims = cp.stats.dims;
    let assignment = (0..dims.contexts)
        .map(|w| {
            let plug = cp
                .stats
                .p_hat(w)
                .zip(cp.stats.g_hat_vec(w))
                .and_then(|(p, g)| plugin_solve(&p, &g));
            let scores: Vec<f64> = match plug {
                Some(mu) => mu.iter().map(|m| m.clamp(0.0, 1.0)).collect(),
                None => cp.locals.structural[w].iter().map(|i| 0.5 * (i.lo + i.hi)).collect(),
            };
            argmax(&scores)
        })
        .collect();
    Policy::new(ActionSpace::Trt, assignment)
}

fn ceil_log2(t: u64) -> u32 {
    if t <= 1 {
        0
    } else {
        64 - (t - 1).leading_zeros()
    }
}

/// Shared BRACE loop.
pub fn run_configured<R: Rng + ?Sized>(
    cfg: &BraceConfig,
    env: &Environment,
    horizon: u64,
    rng: &mut R,
) -> Result<RunTrace> {
    if horizon == 0 {
        return Err(contract("horizon must be at least 1"));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(contract("δ must lie in (0, 1)"));
    }
    if cfg.objective != Objective::Rec && env.num_recommendations() < env.num_treatments() {
        return Err(contract("structural objectives need at least as many recommendations as treatments"));
    }
    if cfg.parallel_structural && cfg.objective != Objective::Rec {
        return Err(contract("a parallel structural certificate accompanies the REC objective only"));
    }

    let dims = Dims::of(env);
    let space = cfg.objective.space();
    let policies = enumerate_policies(dims.contexts, env.num_actions(space), space)?;
    let trt_policies = if cfg.parallel_structural {
        enumerate_policies(dims.contexts, dims.treatments, ActionSpace::Trt)?
    } else {
        Vec::new()
    };
    let first_check = (dims.recommendations * dims.contexts) as u64;

    let mut trace = RunTrace::new(cfg.algorithm_name(), env.name(), horizon, cfg.delta);
    let mut acc = StatsAccumulator::new(dims);
    let mut committed: Option<Policy> = None;
    let mut verdict: Option<Policy> = None;

    for t in 1..=horizon {
        let w = env.draw_context(rng);
        let (z, mode) = match &committed {
            Some(p) => (p.action(w), RoundMode::Committed),
            None => (rng.random_range(0..dims.recommendations), RoundMode::Exploring),
        };
        let (x, y) = env.realize(w, z, rng);
        trace.rounds.push(RoundRecord { t, w, z, x, y, mode });
        if committed.is_some() {
            continue;
        }
        acc.record(w, z, x, y);

        let endpoint = t.is_power_of_two();
        let check = match cfg.schedule {
            CheckSchedule::PhaseEndpoints => endpoint,
            CheckSchedule::EveryRound => endpoint || t >= first_check,
        };
        if !check {
            continue;
        }
        let r = ceil_log2(t);
        let cp = checkpoint(&acc, r, cfg)?;
        let bounds = aggregate(&cp, env, cfg, space, &policies);
        let mut events = Vec::new();

        let leader = match cfg.schedule {
            CheckSchedule::EveryRound if t < first_check => None,
            _ => stopping_check(&bounds),
        };

        let mut structural_bounds = None;
        if cfg.parallel_structural {
            let trt = aggregate(&cp, env, cfg, ActionSpace::Trt, &trt_policies);
            if verdict.is_none() && cp.locals.certified.iter().all(|&c| c) {
                if let Some(i) = stopping_check(&trt) {
                    verdict = Some(trt_policies[i].clone());
                    events.push(PhaseEvent::StructuralDeploy { policy: trt_policies[i].clone() });
                }
            }
            trace.outcome.structural_candidate = Some(structural_candidate(&cp));
            trace.outcome.final_structural_bounds = Some(trt.clone());
            structural_bounds = Some(trt);
        }
        trace.outcome.final_certified = cp.locals.certified.clone();
        if cfg.objective == Objective::Inf {
            trace.outcome.final_structural_bounds = Some(bounds.clone());
        }

        let mut stop = false;
        if let Some(i) = leader {
            let policy = policies[i].clone();
            match cfg.objective {
                Objective::Rec => {
                    events.push(PhaseEvent::Commit { policy: policy.clone() });
                    trace.outcome.commit_time = Some(t);
                    committed = Some(policy);
                }
                Objective::Trt => {
                    events.push(PhaseEvent::Stop { policy: policy.clone() });
                    trace.outcome.commit_time = Some(t);
                    trace.outcome.trt_policy = Some(policy);
                    stop = true;
                }
                Objective::Inf => {}
            }
        }

        if endpoint || !events.is_empty() {
            trace.phases.push(PhaseRecord {
                r,
                t,
                certified: cp.locals.certified.clone(),
                bounds,
                structural_bounds,
                events,
            });
        }
        if stop {
            break;
        }
    }

    trace.outcome.rounds_played = trace.rounds.len() as u64;
    trace.outcome.rec_policy = committed;
    if cfg.parallel_structural {
        trace.outcome.structural_verdict = Some(match verdict {
            Some(policy) => {
                trace.outcome.trt_policy = Some(policy.clone());
                StructuralVerdict::Deploy { policy }
            }
            None => StructuralVerdict::Abstain,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::PolicyBounds;
    use crate::scenarios::Scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bounds(pairs: &[(f64, f64)]) -> PolicyBounds {
        PolicyBounds {
            space: ActionSpace::Rec,
            lcb: pairs.iter().map(|p| p.0).collect(),
            ucb: pairs.iter().map(|p| p.1).collect(),
        }
    }

    #[test]
    fn stopping_rule_is_strict() {
        assert_eq!(stopping_check(&bounds(&[(0.6, 0.7), (0.1, 0.5)])), Some(0));
        assert_eq!(stopping_check(&bounds(&[(0.6, 0.7), (0.1, 0.6)])), None);
        assert_eq!(stopping_check(&bounds(&[(-0.1, 1.1), (-0.1, 1.1)])), None);
        assert_eq!(stopping_check(&bounds(&[(0.1, 0.2), (0.1, 0.3), (0.5, 0.9)])), Some(2));
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
    }

    #[test]
    fn base_checks_only_at_powers_of_two() {
        let env = Scenario::DirectControl.build();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trace = run_brace(Objective::Inf, &env, 1000, 0.05, &mut rng).unwrap();
        let ts: Vec<u64> = trace.phases.iter().map(|p| p.t).collect();
        assert_eq!(ts, vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512]);
        assert_eq!(trace.rounds.len(), 1000);
        assert!(trace.outcome.rec_policy.is_none() && trace.outcome.trt_policy.is_none());
    }

    #[test]
    fn rec_commit_is_permanent() {
        let env = Scenario::StrongIvEasy.build();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trace = run_brace(Objective::Rec, &env, 2048, 0.05, &mut rng).unwrap();
        let tc = trace.outcome.commit_time.expect("strong IV commits");
        let policy = trace.outcome.rec_policy.clone().unwrap();
        for round in &trace.rounds {
            if round.t > tc {
                assert_eq!(round.mode, RoundMode::Committed);
                assert_eq!(round.z, policy.action(round.w));
            } else {
                assert_eq!(round.mode, RoundMode::Exploring);
            }
        }
    }

    #[test]
    fn trt_stop_ends_the_run() {
        let env = Scenario::StrongIvEasy.build();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trace = run_brace(Objective::Trt, &env, 8192, 0.05, &mut rng).unwrap();
        let tc = trace.outcome.commit_time.expect("stops before 8192");
        assert_eq!(trace.outcome.rounds_played, tc);
        assert!(tc.is_power_of_two());
    }

    #[test]
    fn shape_and_variant_contracts() {
        let env = Scenario::DirectControl.build();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(run_brace_fast(Objective::Inf, &env, 10, 0.05, &mut rng).is_err());
        assert!(run_brace_partial(Objective::Rec, &env, 10, 0.05, &mut rng).is_err());
        assert!(run_brace(Objective::Trt, &env, 0, 0.05, &mut rng).is_err());
        assert!(run_brace(Objective::Trt, &env, 10, 1.5, &mut rng).is_err());
    }
}
