//! Candidate orthogonal score for structural policy values and an exact
//! check of its conditional-bias factorization on finite environments.
//!
//! For a context `w` with nuisances `(P̂, μ̂, q)` the score is
//! `Γ = μ̂_a + e_aᵀ P̂⁻¹ (e_z / q(z)) (y − μ̂_x)` with `a = π(w)`. Under
//! homogeneity its conditional bias is `e_aᵀ P̂⁻¹ (P̂ − P)(μ̂ − μ)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{contract, Result};
use crate::linalg::{inf_norm, sigma_min, SINGULARITY_THRESHOLD};
use crate::model::{Environment, Policy};

/// Nuisances for one context, fixed before the evaluated round.
#[derive(Clone, Debug, PartialEq)]
pub struct NuisancePair {
    pub p_hat: DMatrix<f64>,
    pub mu_hat: DVector<f64>,
    /// Recommendation propensities `q(z | w)`.
    pub q: DVector<f64>,
}

impl NuisancePair {
    pub fn new(p_hat: DMatrix<f64>, mu_hat: DVector<f64>, q: DVector<f64>) -> Result<Self> {
        if !p_hat.is_square() || p_hat.nrows() != q.len() || p_hat.ncols() != mu_hat.len() {
            return Err(contract("nuisances need a square P̂ matching μ̂ and q"));
        }
        if q.iter().any(|&v| v <= 0.0) || (q.sum() - 1.0).abs() > 1e-12 {
            return Err(contract("propensities must be positive and sum to one"));
        }
        Ok(NuisancePair { p_hat, mu_hat, q })
    }

    /// Uniform propensities with the population nuisances of context `w`.
    pub fn truth(env: &Environment, w: usize) -> Result<Self> {
        let k = env.num_recommendations();
        NuisancePair::new(env.compliance_matrix(w), env.structural_means(w), DVector::from_element(k, 1.0 / k as f64))
    }

    fn inverse(&self) -> Result<DMatrix<f64>> {
        invert(&self.p_hat)
    }
}

fn invert(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !p.is_square() || sigma_min(p) <= SINGULARITY_THRESHOLD {
        return Err(contract("P̂ must be square and nonsingular"));
    }
    p.clone().try_inverse().ok_or_else(|| contract("P̂ must be square and nonsingular"))
}

pub fn score_gamma(policy: &Policy, w: usize, z: usize, x: usize, y: f64, nuis: &NuisancePair) -> Result<f64> {
    let a = policy.action(w);
    let inv = nuis.inverse()?;
    Ok(nuis.mu_hat[a] + inv[(a, z)] / nuis.q[z] * (y - nuis.mu_hat[x]))
}

/// `E[Γ | w] − μ_{π(w)}(w)` by enumerating recommendations and compliance
/// types with their exact weights and mean rewards.
pub fn conditional_bias_exact(env: &Environment, w: usize, policy: &Policy, nuis: &NuisancePair) -> Result<f64> {
    let a = policy.action(w);
    let inv = nuis.inverse()?;
    let mut expected = 0.0;
    for z in 0..env.num_recommendations() {
        for (c, ty) in env.compliance_types().iter().enumerate() {
            let weight = ty.weights[w];
            if weight == 0.0 {
                continue;
            }
            let x = ty.map[z];
            let y = env.mean_reward(c, w, x);
            let gamma = nuis.mu_hat[a] + inv[(a, z)] / nuis.q[z] * (y - nuis.mu_hat[x]);
            expected += nuis.q[z] * weight * gamma;
        }
    }
    Ok(expected - env.structural_means(w)[a])
}

pub fn product_form_rhs(
    p_hat: &DMatrix<f64>,
    p0: &DMatrix<f64>,
    mu_hat: &DVector<f64>,
    mu0: &DVector<f64>,
    policy: &Policy,
    w: usize,
) -> Result<f64> {
    let inv = invert(p_hat)?;
    let v = inv * (p_hat - p0) * (mu_hat - mu0);
    Ok(v[policy.action(w)])
}

/// Random nuisance perturbation: entries of `P̂` move by up to `scale` and
/// rows are renormalized; `μ̂` moves by up to `scale`. Redrawn until `P̂`
/// stays nonnegative and nonsingular.
pub fn perturb<R: Rng + ?Sized>(p0: &DMatrix<f64>, mu0: &DVector<f64>, scale: f64, rng: &mut R) -> (DMatrix<f64>, DVector<f64>) {
    loop {
        let mut p = p0.map(|v| (v + rng.random_range(-scale..=scale)).max(0.0));
        let mut ok = true;
        for mut row in p.row_iter_mut() {
            let s = row.sum();
            if s <= 0.0 {
                ok = false;
                break;
            }
            row /= s;
        }
        if ok && sigma_min(&p) > 1e-6 {
            let mu = mu0.map(|v| v + rng.random_range(-scale..=scale));
            return (p, mu);
        }
    }
}

/// Direction `D = 1 vᵀ` with `v ⟂ 1`: rows of `P₀ + εD` still sum to one and
/// `P̂_ε⁻¹ D` does not depend on `ε`, so the remainder is exactly quadratic.
pub fn nilpotent_direction(k: usize, alpha: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |_, j| match j {
        0 => alpha,
        1 => -alpha,
        _ => 0.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityRow {
    pub scenario: String,
    pub context: usize,
    pub perturbation: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrthoscoreReport {
    pub rows: Vec<IdentityRow>,
    pub max_identity_diff: f64,
    /// Largest bias seen when one nuisance is exact.
    pub max_double_robust_bias: f64,
    /// `bias(ε) / bias(ε/2)` per scenario and context.
    pub scaling_ratios: Vec<(String, usize, f64)>,
    /// `|rhs| / (‖ΔP‖∞‖Δμ‖∞)` on ill-conditioned matrices, with `‖P̂⁻¹‖∞`.
    pub amplification: Vec<(String, f64, f64)>,
}

impl OrthoscoreReport {
    pub fn passed(&self, identity_tol: f64, robust_tol: f64, ratio_tol: f64) -> bool {
        self.max_identity_diff <= identity_tol
            && self.max_double_robust_bias <= robust_tol
            && self.scaling_ratios.iter().all(|(_, _, r)| (r - 4.0).abs() <= ratio_tol)
    }
}

/// Run the identity, double-robustness and scaling checks on each
/// environment. Every policy of the context is evaluated per perturbation.
pub fn verify<R: Rng + ?Sized>(envs: &[Environment], draws: usize, rng: &mut R) -> Result<OrthoscoreReport> {
    let mut report = OrthoscoreReport {
        rows: Vec::new(),
        max_identity_diff: 0.0,
        max_double_robust_bias: 0.0,
        scaling_ratios: Vec::new(),
        amplification: Vec::new(),
    };
    for env in envs {
        if !env.is_square() {
            return Err(contract("the orthogonal-score check is square-only"));
        }
        let k = env.num_treatments();
        for w in 0..env.num_contexts() {
            let truth = NuisancePair::truth(env, w)?;
            let (p0, mu0, q) = (truth.p_hat.clone(), truth.mu_hat.clone(), truth.q.clone());
            let policies: Vec<Policy> = (0..k).map(|a| Policy::constant(crate::ActionSpace::Trt, a, env.num_contexts())).collect();
            for i in 0..draws {
                let (p_hat, mu_hat) = perturb(&p0, &mu0, 0.05, rng);
                let pair = NuisancePair::new(p_hat.clone(), mu_hat.clone(), q.clone())?;
                let only_p = NuisancePair::new(p_hat.clone(), mu0.clone(), q.clone())?;
                let only_mu = NuisancePair::new(p0.clone(), mu_hat.clone(), q.clone())?;
                for policy in &policies {
                    let lhs = conditional_bias_exact(env, w, policy, &pair)?;
                    let rhs = product_form_rhs(&p_hat, &p0, &mu_hat, &mu0, policy, w)?;
                    let diff = (lhs - rhs).abs();
                    report.max_identity_diff = report.max_identity_diff.max(diff);
                    if policy.action(w) == 0 {
                        report.rows.push(IdentityRow { scenario: env.name().to_string(), context: w, perturbation: i, lhs, rhs, diff });
                    }
                    for exact in [&only_p, &only_mu] {
                        let b = conditional_bias_exact(env, w, policy, exact)?.abs();
                        report.max_double_robust_bias = report.max_double_robust_bias.max(b);
                    }
                }
            }

            let d = nilpotent_direction(k, 0.5);
            let v = DVector::from_fn(k, |i, _| 0.3 - 0.2 * i as f64);
            let bias_at = |eps: f64| -> Result<f64> {
                let pair = NuisancePair::new(&p0 + &d * eps, &mu0 + &v * eps, q.clone())?;
                conditional_bias_exact(env, w, &policies[0], &pair)
            };
            let ratio = bias_at(0.1)? / bias_at(0.05)?;
            report.scaling_ratios.push((env.name().to_string(), w, ratio));
            if k == 2 {
                let (amp, inv_norm) = amplification(env, w, 0.01)?;
                report.amplification.push((env.name().to_string(), amp, inv_norm));
            }
        }
    }
    Ok(report)
}

/// `|rhs| / (‖ΔP‖∞ ‖Δμ‖∞)` and `‖P̂⁻¹‖∞` for a perturbation that pulls
/// the rows of a two-treatment `P(w)` in opposite directions.
pub fn amplification(env: &Environment, w: usize, eps: f64) -> Result<(f64, f64)> {
    let p0 = env.compliance_matrix(w);
    let mu0 = env.structural_means(w);
    let k = p0.ncols();
    if k != 2 || !p0.is_square() {
        return Err(contract("the amplification probe expects a 2x2 design"));
    }
    let dp = DMatrix::from_row_slice(2, 2, &[eps, -eps, -eps, eps]);
    let p_hat = &p0 + &dp;
    let mu_hat = &mu0 + DVector::from_row_slice(&[eps, -eps]);
    let policy = Policy::constant(crate::ActionSpace::Trt, 0, env.num_contexts());
    let rhs = product_form_rhs(&p_hat, &p0, &mu_hat, &mu0, &policy, w)?.abs();
    let naive = inf_norm(&dp) * (&mu_hat - &mu0).amax();
    Ok((rhs / naive, inf_norm(&invert(&p_hat)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ActionSpace;
    use crate::scenarios::Scenario;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_pair(k: usize) -> NuisancePair {
        NuisancePair::new(
            DMatrix::identity(k, k),
            DVector::from_fn(k, |i, _| 0.2 + 0.1 * i as f64),
            DVector::from_element(k, 1.0 / k as f64),
        )
        .unwrap()
    }

    #[test]
    fn score_examples() {
        let nuis = identity_pair(2);
        let pi = Policy::new(ActionSpace::Trt, vec![1]);
        // zero residual
        assert_abs_diff_eq!(score_gamma(&pi, 0, 1, 0, 0.2, &nuis).unwrap(), 0.3, epsilon = 1e-15);
        // z = π(w): μ̂_a + K (y − μ̂_x)
        assert_abs_diff_eq!(score_gamma(&pi, 0, 1, 1, 1.0, &nuis).unwrap(), 0.3 + 2.0 * 0.7, epsilon = 1e-15);
        // z ≠ π(w)
        assert_abs_diff_eq!(score_gamma(&pi, 0, 0, 0, 1.0, &nuis).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn singular_nuisance_is_rejected() {
        let nuis = NuisancePair::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]),
            DVector::from_element(2, 0.5),
            DVector::from_element(2, 0.5),
        )
        .unwrap();
        let pi = Policy::new(ActionSpace::Trt, vec![0]);
        assert!(score_gamma(&pi, 0, 0, 0, 1.0, &nuis).is_err());
        assert!(NuisancePair::new(DMatrix::identity(2, 2), DVector::zeros(2), DVector::from_row_slice(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn exact_nuisances_give_zero_bias() {
        let env = Scenario::StrongIvEasy.build();
        let nuis = NuisancePair::truth(&env, 0).unwrap();
        for a in 0..2 {
            let pi = Policy::new(ActionSpace::Trt, vec![a]);
            assert!(conditional_bias_exact(&env, 0, &pi, &nuis).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn identity_holds_on_homogeneous_scenarios() {
        let envs: Vec<Environment> = Scenario::ALL
            .iter()
            .map(|s| s.build())
            .filter(|e| e.is_square() && e.is_homogeneous())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let report = verify(&envs, 20, &mut rng).unwrap();
        assert!(report.passed(1e-10, 1e-12, 1e-9), "{:?} {:?}", report.max_identity_diff, report.scaling_ratios);
    }

    #[test]
    fn identity_breaks_without_homogeneity() {
        let env = Scenario::HomogeneityViolation.build();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let report = verify(&[env], 5, &mut rng).unwrap();
        assert!(report.max_identity_diff > 1e-3);
    }

    #[test]
    fn weak_matrices_amplify_the_remainder() {
        let env = Scenario::WeakIvAbstain.build();
        let (amp, inv_norm) = amplification(&env, 0, 0.01).unwrap();
        assert!(amp > 1.0, "{amp}");
        assert!(amp <= inv_norm + 1e-9);
        let strong = Scenario::DirectControl.build();
        let (amp_strong, _) = amplification(&strong, 0, 0.01).unwrap();
        assert!(amp > 4.0 * amp_strong);
    }
}
