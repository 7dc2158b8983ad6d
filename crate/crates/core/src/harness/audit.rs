//! Replays a run's exploration data against the population truth to check
//! the concentration event and the certified-inversion guarantees.

use serde::Serialize;

use crate::algorithms::{RoundMode, RunTrace};
use crate::error::Result;
use crate::estimation::{Dims, LocalIntervals, Radii, RewardRadius, StatsAccumulator, StructuralMode};
use crate::linalg::{identification_inverse, inf_norm};
use crate::model::Environment;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AuditResult {
    pub phases_checked: usize,
    /// Radius violations: compliance rows, ITT means, context frequencies.
    pub radius_violations: usize,
    pub certified_checks: usize,
    /// Certified contexts where `‖P⁻¹‖ > 2‖P̂⁻¹‖` or `‖μ̂ − μ‖∞ > c`.
    pub certified_violations: usize,
}

impl AuditResult {
    pub fn event_held(&self) -> bool {
        self.radius_violations == 0
    }
}

/// Audit every phase endpoint of a trace. Only exploring rounds enter the
/// statistics, as in the algorithm itself.
pub fn audit_trace(env: &Environment, trace: &RunTrace, family: RewardRadius) -> Result<AuditResult> {
    let dims = Dims::of(env);
    let mut acc = StatsAccumulator::new(dims);
    let mut out = AuditResult::default();
    let nu = env.context_probs();
    let truth_p: Vec<_> = (0..dims.contexts).map(|w| env.compliance_matrix(w)).collect();
    let truth_g: Vec<_> = (0..dims.contexts).map(|w| env.itt_means(w)).collect();
    let truth_mu: Vec<_> = (0..dims.contexts).map(|w| env.structural_means(w)).collect();

    for round in trace.rounds.iter().filter(|r| r.mode == RoundMode::Exploring) {
        acc.record(round.w, round.z, round.x, round.y);
        let t = acc.rounds();
        if !t.is_power_of_two() {
            continue;
        }
        let r = t.trailing_zeros();
        let stats = acc.snapshot(r);
        let radii = Radii::compute(&stats, trace.delta, family)?;
        out.phases_checked += 1;

        let nu_hat = stats.nu_hat();
        for w in 0..dims.contexts {
            if (nu_hat[w] - nu[w]).abs() > radii.d[w] {
                out.radius_violations += 1;
            }
            for z in 0..dims.recommendations {
                if let Some(row) = stats.p_hat_row(w, z) {
                    let l1: f64 = (0..dims.treatments).map(|x| (row[x] - truth_p[w][(z, x)]).abs()).sum();
                    if l1 > radii.a[w][z] {
                        out.radius_violations += 1;
                    }
                }
                if let Some(g) = stats.g_hat(w, z) {
                    if (g - truth_g[w][z]).abs() > radii.b[w][z] {
                        out.radius_violations += 1;
                    }
                }
            }
        }

        let locals = LocalIntervals::build(&stats, &radii, StructuralMode::PointId);
        for w in 0..dims.contexts {
            let (Some(inv_hat), Some(c), Some(mu_hat)) = (locals.inv_norm[w], locals.half_width[w], &locals.mu_hat[w]) else {
                continue;
            };
            if !locals.certified[w] {
                continue;
            }
            out.certified_checks += 1;
            let inv_true = identification_inverse(&truth_p[w]).map_or(f64::INFINITY, |m| inf_norm(&m));
            let err = mu_hat.iter().zip(truth_mu[w].iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if inv_true > 2.0 * inv_hat || err > c {
                out.certified_violations += 1;
            }
        }
    }
    Ok(out)
}

/// `P(X ≥ k)` for `X ~ Binomial(n, p)`.
pub fn binomial_upper_tail(n: u64, k: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_pmf = n as f64 * lq;
    let mut tail = 0.0;
    for i in 0..=n {
        if i >= k {
            tail += log_pmf.exp();
        }
        if i < n {
            log_pmf += ((n - i) as f64).ln() - ((i + 1) as f64).ln() + lp - lq;
        }
    }
    tail.min(1.0)
}

/// One-sided test of `H0: rate ≤ p0`. Passes unless `H0` is rejected at
/// level `alpha`.
pub fn rate_not_above(violations: u64, n: u64, p0: f64, alpha: f64) -> bool {
    binomial_upper_tail(n, violations, p0) > alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run_brace, Objective};
    use crate::scenarios::Scenario;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binomial_tail_values() {
        assert_abs_diff_eq!(binomial_upper_tail(2, 1, 0.5), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(binomial_upper_tail(10, 0, 0.3), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(binomial_upper_tail(3, 3, 0.5), 0.125, epsilon = 1e-12);
        // 200 trials at 5%: ten successes is unremarkable, twenty is not
        assert!(rate_not_above(10, 200, 0.05, 0.05));
        assert!(!rate_not_above(20, 200, 0.05, 0.05));
    }

    #[test]
    fn audit_of_a_clean_run() {
        let env = Scenario::StrongIvEasy.build();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trace = run_brace(Objective::Inf, &env, 1024, 0.05, &mut rng).unwrap();
        let audit = audit_trace(&env, &trace, RewardRadius::Hoeffding).unwrap();
        assert_eq!(audit.phases_checked, 11);
        assert!(audit.event_held());
        assert!(audit.certified_checks > 0);
        assert_eq!(audit.certified_violations, 0);
    }
}
