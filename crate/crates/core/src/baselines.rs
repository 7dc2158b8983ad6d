//! Foil learners: compliance-aware recommendation bandits and uncertified
//! IV treatment rules. None of them ever abstains.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::Serialize;

use crate::algorithms::{RoundMode, RoundRecord, RunTrace};
use crate::error::{contract, Result};
use crate::estimation::{plugin_solve, Dims, PhaseStats, StatsAccumulator};
use crate::linalg::sigma_min;
use crate::model::{argmax, ActionSpace, Environment, Policy};

/// Per-(context, arm) pull counts, reward-update counts and reward sums.
/// Pulls drive the exploration bonus; updates drive the mean.
#[derive(Clone, Debug)]
pub struct BanditState {
    pub pulls: Vec<Vec<u64>>,
    pub counts: Vec<Vec<u64>>,
    pub sums: Vec<Vec<f64>>,
}

impl BanditState {
    pub fn new(contexts: usize, arms: usize) -> Self {
        BanditState {
            pulls: vec![vec![0; arms]; contexts],
            counts: vec![vec![0; arms]; contexts],
            sums: vec![vec![0.0; arms]; contexts],
        }
    }

    pub fn pull(&mut self, w: usize, arm: usize) {
        self.pulls[w][arm] += 1;
    }

    pub fn update(&mut self, w: usize, arm: usize, y: f64) {
        self.counts[w][arm] += 1;
        self.sums[w][arm] += y;
    }

    pub fn mean(&self, w: usize, arm: usize) -> f64 {
        match self.counts[w][arm] {
            0 => 0.0,
            n => self.sums[w][arm] / n as f64,
        }
    }

    /// UCB1 choice: unpulled arms first (lowest index), then the largest
    /// `mean + sqrt(2 ln t / N)`.
    pub fn ucb_arm(&self, w: usize, t: u64) -> usize {
        if let Some(arm) = self.pulls[w].iter().position(|&n| n == 0) {
            return arm;
        }
        let lt = (t.max(1) as f64).ln();
        let scores: Vec<f64> = (0..self.pulls[w].len())
            .map(|a| self.mean(w, a) + (2.0 * lt / self.pulls[w][a] as f64).sqrt())
            .collect();
        argmax(&scores)
    }

    pub fn greedy(&self, w: usize) -> usize {
        let means: Vec<f64> = (0..self.counts[w].len()).map(|a| self.mean(w, a)).collect();
        argmax(&means)
    }

    pub fn greedy_policy(&self, space: ActionSpace) -> Policy {
        Policy::new(space, (0..self.counts.len()).map(|w| self.greedy(w)).collect())
    }
}

/// Translate treatment labels into recommendation labels. Rectangular designs
/// use the first `K_x` recommendation labels.
fn as_rec(policy: &Policy) -> Policy {
    Policy::new(ActionSpace::Rec, policy.assignment.clone())
}

fn as_trt(policy: &Policy, num_treatments: usize) -> Policy {
    Policy::new(ActionSpace::Trt, policy.assignment.iter().map(|&a| a.min(num_treatments - 1)).collect())
}

fn finish(mut trace: RunTrace, rec: Policy, trt: Policy) -> RunTrace {
    trace.outcome.rounds_played = trace.rounds.len() as u64;
    trace.outcome.rec_policy = Some(rec);
    trace.outcome.trt_policy = Some(trt);
    trace
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum UcbUpdate {
    Chosen,
    CompliantOnly,
}

fn run_rec_ucb<R: Rng + ?Sized>(
    name: &str,
    update: UcbUpdate,
    env: &Environment,
    horizon: u64,
    rng: &mut R,
) -> RunTrace {
    let (s, kz) = (env.num_contexts(), env.num_recommendations());
    let mut state = BanditState::new(s, kz);
    let mut trace = RunTrace::new(name, env.name(), horizon, 0.0);
    for t in 1..=horizon {
        let w = env.draw_context(rng);
        let z = state.ucb_arm(w, t);
        let (x, y) = env.realize(w, z, rng);
        state.pull(w, z);
        if update == UcbUpdate::Chosen || x == z {
            state.update(w, z, y);
        }
        trace.rounds.push(RoundRecord { t, w, z, x, y, mode: RoundMode::Adaptive });
    }
    let rec = state.greedy_policy(ActionSpace::Rec);
    let trt = as_trt(&rec, env.num_treatments());
    finish(trace, rec, trt)
}

/// UCB1 over recommendation arms on the chosen arm's reward.
pub fn run_chosen_ucb<R: Rng + ?Sized>(env: &Environment, horizon: u64, rng: &mut R) -> RunTrace {
    run_rec_ucb("chosen_ucb", UcbUpdate::Chosen, env, horizon, rng)
}

/// UCB1 that only learns from rounds where the unit followed the
/// recommendation.
pub fn run_comply_ucb<R: Rng + ?Sized>(env: &Environment, horizon: u64, rng: &mut R) -> RunTrace {
    run_rec_ucb("comply_ucb", UcbUpdate::CompliantOnly, env, horizon, rng)
}

/// UCB1 on realized-treatment rewards, recommending the label of the
/// leading treatment.
pub fn run_actual_ucb<R: Rng + ?Sized>(env: &Environment, horizon: u64, rng: &mut R) -> RunTrace {
    let (s, kx) = (env.num_contexts(), env.num_treatments());
    let mut state = BanditState::new(s, kx);
    let mut trace = RunTrace::new("actual_ucb", env.name(), horizon, 0.0);
    for t in 1..=horizon {
        let w = env.draw_context(rng);
        let z = state.ucb_arm(w, t);
        let (x, y) = env.realize(w, z, rng);
        state.pull(w, x);
        state.update(w, x, y);
        trace.rounds.push(RoundRecord { t, w, z, x, y, mode: RoundMode::Adaptive });
    }
    let trt = state.greedy_policy(ActionSpace::Trt);
    finish(trace, as_rec(&trt), trt)
}

/// Beta(1,1)-Bernoulli Thompson sampling per (context, recommendation).
pub fn run_thompson<R: Rng + ?Sized>(env: &Environment, horizon: u64, rng: &mut R) -> RunTrace {
    let (s, kz) = (env.num_contexts(), env.num_recommendations());
    let mut state = BanditState::new(s, kz);
    let mut trace = RunTrace::new("thompson", env.name(), horizon, 0.0);
    let posterior = |state: &BanditState, w: usize, z: usize| {
        let wins = state.sums[w][z];
        (1.0 + wins, 1.0 + state.counts[w][z] as f64 - wins)
    };
    for t in 1..=horizon {
        let w = env.draw_context(rng);
        let draws: Vec<f64> = (0..kz)
            .map(|z| {
                let (a, b) = posterior(&state, w, z);
                Beta::new(a, b).expect("positive Beta parameters").sample(rng)
            })
            .collect();
        let z = argmax(&draws);
        let (x, y) = env.realize(w, z, rng);
        state.update(w, z, y);
        trace.rounds.push(RoundRecord { t, w, z, x, y, mode: RoundMode::Adaptive });
    }
    let rec = Policy::new(
        ActionSpace::Rec,
        (0..s)
            .map(|w| {
                let means: Vec<f64> = (0..kz)
                    .map(|z| {
                        let (a, b) = posterior(&state, w, z);
                        a / (a + b)
                    })
                    .collect();
                argmax(&means)
            })
            .collect(),
    );
    let trt = as_trt(&rec, env.num_treatments());
    finish(trace, rec, trt)
}

/// Exploration schedule of the uncertified IV learner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TslsSchedule {
    /// Explore with probability `t^{-1/3}`.
    EpsilonDecay,
    /// Explore for the first `⌈T/4⌉` rounds.
    Fixed,
    /// Explore until every arm has 32 draws and every `σ_min(P̂(w)) ≥ 0.1`.
    Adaptive,
}

pub const ADAPTIVE_MIN_COUNT: u64 = 32;
pub const ADAPTIVE_MIN_SIGMA: f64 = 0.1;

impl TslsSchedule {
    pub fn name(self) -> &'static str {
        match self {
            TslsSchedule::EpsilonDecay => "tsls_epsilon_decay",
            TslsSchedule::Fixed => "tsls_fixed",
            TslsSchedule::Adaptive => "tsls_adaptive",
        }
    }
}

/// Plug-in `argmax μ̂` per context; treatment 0 where `P̂` is missing or
/// singular.
pub fn tsls_policy(stats: &PhaseStats) -> Policy {
    let assignment = (0..stats.dims.contexts)
        .map(|w| {
            stats
                .p_hat(w)
                .zip(stats.g_hat_vec(w))
                .and_then(|(p, g)| plugin_solve(&p, &g))
                .map_or(0, |mu| argmax(mu.as_slice()))
        })
        .collect();
    Policy::new(ActionSpace::Trt, assignment)
}

fn adaptive_ready(stats: &PhaseStats) -> bool {
    let dims = stats.dims;
    (0..dims.contexts).all(|w| {
        (0..dims.recommendations).all(|z| stats.count(w, z) >= ADAPTIVE_MIN_COUNT)
            && stats.p_hat(w).is_some_and(|p| sigma_min(&p) >= ADAPTIVE_MIN_SIGMA)
    })
}

/// Two-stage least squares with no certification.
pub fn run_2sls<R: Rng + ?Sized>(
    schedule: TslsSchedule,
    env: &Environment,
    horizon: u64,
    rng: &mut R,
) -> Result<RunTrace> {
    if env.num_recommendations() < env.num_treatments() {
        return Err(contract("2SLS needs at least as many recommendations as treatments"));
    }
    let dims = Dims::of(env);
    let mut acc = StatsAccumulator::new(dims);
    let mut trace = RunTrace::new(schedule.name(), env.name(), horizon, 0.0);
    let fixed_rounds = horizon.div_ceil(4);
    let mut adaptive_done = false;
    for t in 1..=horizon {
        let w = env.draw_context(rng);
        let explore = match schedule {
            TslsSchedule::EpsilonDecay => rng.random::<f64>() < (t as f64).powf(-1.0 / 3.0),
            TslsSchedule::Fixed => t <= fixed_rounds,
            TslsSchedule::Adaptive => {
                if !adaptive_done {
                    adaptive_done = adaptive_ready(&acc.snapshot(0));
                }
                !adaptive_done
            }
        };
        let (z, mode) = if explore {
            (rng.random_range(0..dims.recommendations), RoundMode::Exploring)
        } else {
            (tsls_policy(&acc.snapshot(0)).action(w), RoundMode::Adaptive)
        };
        let (x, y) = env.realize(w, z, rng);
        acc.record(w, z, x, y);
        trace.rounds.push(RoundRecord { t, w, z, x, y, mode });
    }
    let trt = tsls_policy(&acc.snapshot(0));
    Ok(finish(trace, as_rec(&trt), trt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{plugin_mu, Radii, RewardRadius};
    use crate::scenarios::Scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn ucb_plays_unplayed_arms_first() {
        let mut s = BanditState::new(1, 3);
        assert_eq!(s.ucb_arm(0, 1), 0);
        s.pull(0, 0);
        s.update(0, 0, 1.0);
        assert_eq!(s.ucb_arm(0, 2), 1);
        for arm in 1..3 {
            s.pull(0, arm);
            s.update(0, arm, 0.0);
        }
        assert_eq!(s.ucb_arm(0, 4), 0);
    }

    #[test]
    fn perfect_compliance_traces_coincide() {
        let env = Scenario::DirectControl.build();
        let a = run_chosen_ucb(&env, 500, &mut rng(3));
        let b = run_comply_ucb(&env, 500, &mut rng(3));
        let c = run_actual_ucb(&env, 500, &mut rng(3));
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.rounds, c.rounds);
        assert_eq!(a.outcome.rec_policy, c.outcome.rec_policy);
    }

    #[test]
    fn chosen_ucb_and_thompson_find_direct_control_optimum() {
        let env = Scenario::DirectControl.build();
        let mut hits = (0, 0);
        for seed in 0..10 {
            let a = run_chosen_ucb(&env, 2048, &mut rng(seed));
            let b = run_thompson(&env, 2048, &mut rng(seed));
            let value = |t: &RunTrace| env.policy_value(t.outcome.rec_policy.as_ref().unwrap()).unwrap();
            hits.0 += usize::from((value(&a) - 0.775).abs() < 1e-12);
            hits.1 += usize::from((value(&b) - 0.775).abs() < 1e-12);
        }
        assert!(hits.0 >= 9 && hits.1 >= 9, "{hits:?}");
    }

    #[test]
    fn comply_ucb_update_rate_on_private_signal() {
        // recommendation 0 is followed only by the first type
        let env = Scenario::PrivateSignal.build();
        let trace = run_comply_ucb(&env, 10_000, &mut rng(11));
        let (mut played, mut followed) = (0u32, 0u32);
        for r in trace.rounds.iter().filter(|r| r.z == 0) {
            played += 1;
            followed += u32::from(r.x == r.z);
        }
        let ratio = f64::from(followed) / f64::from(played);
        assert!((ratio - 0.5).abs() <= 0.05, "{ratio}");
    }

    #[test]
    fn tsls_matches_shared_plugin() {
        let env = Scenario::StrongIvEasy.build();
        let mut acc = StatsAccumulator::new(Dims::of(&env));
        let mut r = rng(4);
        for _ in 0..500 {
            let z = r.random_range(0..2);
            let (w, x, y) = env.sample_round(&mut r, z);
            acc.record(w, z, x, y);
        }
        let stats = acc.snapshot(9);
        let radii = Radii::compute(&stats, 0.05, RewardRadius::Hoeffding).unwrap();
        let (p, g) = (stats.p_hat(0).unwrap(), stats.g_hat_vec(0).unwrap());
        let direct = plugin_solve(&p, &g).unwrap();
        let (shared, _) = plugin_mu(&p, &g, radii.a_max[0], radii.b_max[0]).unwrap();
        assert_eq!(direct, shared);
        assert_eq!(tsls_policy(&stats).action(0), argmax(direct.as_slice()));
    }

    #[test]
    fn tsls_schedules_never_abstain() {
        let env = Scenario::WeakIvSmallGap.build();
        for schedule in [TslsSchedule::EpsilonDecay, TslsSchedule::Fixed, TslsSchedule::Adaptive] {
            let trace = run_2sls(schedule, &env, 1000, &mut rng(1)).unwrap();
            assert!(trace.outcome.trt_policy.is_some() && trace.outcome.rec_policy.is_some());
            assert_eq!(trace.rounds.len(), 1000);
        }
    }

    #[test]
    fn fixed_schedule_explores_first_quarter() {
        let env = Scenario::DirectControl.build();
        let trace = run_2sls(TslsSchedule::Fixed, &env, 401, &mut rng(2)).unwrap();
        let exploring = trace.rounds.iter().filter(|r| r.mode == RoundMode::Exploring).count();
        assert_eq!(exploring, 101);
        assert!(trace.rounds[..101].iter().all(|r| r.mode == RoundMode::Exploring));
    }
}
