//! Finite-context noncompliance environments and their exact population quantities.
//!
//! An environment is a mixture of latent compliance types. Each type carries a
//! per-context weight, a deterministic map from recommendations to treatments
//! and Bernoulli success probabilities for every (context, treatment) pair.
//! Everything the algorithms try to learn (compliance matrices `P(w)`, ITT
//! means `g(w)`, structural means `μ(w)`, policy values) is computed here
//! exactly, so every benchmark number has a ground truth.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, BraceError, Result};
use crate::linalg;

const PROB_TOL: f64 = 1e-12;

/// Upper bound on `num_actions^S` accepted by [`enumerate_policies`].
pub const MAX_POLICIES: usize = 100_000;

/// One latent compliance type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplianceType {
    /// Probability of this type in each context.
    pub weights: Vec<f64>,
    /// Treatment taken under each recommendation.
    pub map: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct EnvironmentDoc {
    name: String,
    context_probs: Vec<f64>,
    num_recommendations: usize,
    num_treatments: usize,
    compliance_types: Vec<ComplianceType>,
    /// Indexed `[type][context][treatment]`.
    mean_rewards: Vec<Vec<Vec<f64>>>,
}

/// Immutable finite-context population. Validated on construction and on
/// deserialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvironmentDoc", into = "EnvironmentDoc")]
pub struct Environment {
    doc: EnvironmentDoc,
}

impl TryFrom<EnvironmentDoc> for Environment {
    type Error = BraceError;

    fn try_from(doc: EnvironmentDoc) -> Result<Self> {
        validate(&doc)?;
        Ok(Environment { doc })
    }
}

impl From<Environment> for EnvironmentDoc {
    fn from(env: Environment) -> Self {
        env.doc
    }
}

fn invalid(msg: impl Into<String>) -> BraceError {
    BraceError::InvalidEnvironment(msg.into())
}

fn validate(doc: &EnvironmentDoc) -> Result<()> {
    let s = doc.context_probs.len();
    if s == 0 {
        return Err(invalid("at least one context is required"));
    }
    if doc.num_recommendations == 0 || doc.num_treatments == 0 {
        return Err(invalid("action spaces must be nonempty"));
    }
    if doc.context_probs.iter().any(|&p| !(p > 0.0) || p > 1.0) {
        return Err(invalid("context probabilities must lie in (0, 1]"));
    }
    if (doc.context_probs.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
        return Err(invalid("context probabilities must sum to one"));
    }
    if doc.compliance_types.is_empty() {
        return Err(invalid("at least one compliance type is required"));
    }
    if doc.mean_rewards.len() != doc.compliance_types.len() {
        return Err(invalid("mean_rewards must have one table per compliance type"));
    }
    for (c, ty) in doc.compliance_types.iter().enumerate() {
        if ty.weights.len() != s {
            return Err(invalid(format!("type {c}: expected {s} context weights")));
        }
        if ty.weights.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
            return Err(invalid(format!("type {c}: weights must lie in [0, 1]")));
        }
        if ty.map.len() != doc.num_recommendations {
            return Err(invalid(format!(
                "type {c}: map must have {} entries",
                doc.num_recommendations
            )));
        }
        if ty.map.iter().any(|&x| x >= doc.num_treatments) {
            return Err(invalid(format!("type {c}: map entry out of treatment range")));
        }
        let table = &doc.mean_rewards[c];
        if table.len() != s || table.iter().any(|row| row.len() != doc.num_treatments) {
            return Err(invalid(format!("type {c}: mean reward table has wrong shape")));
        }
        if table.iter().flatten().any(|&m| !(0.0..=1.0).contains(&m)) {
            return Err(invalid(format!("type {c}: mean rewards must lie in [0, 1]")));
        }
    }
    for w in 0..s {
        let total: f64 = doc.compliance_types.iter().map(|t| t.weights[w]).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(invalid(format!("type weights in context {w} sum to {total}")));
        }
    }
    Ok(())
}

impl Environment {
    pub fn new(
        name: impl Into<String>,
        context_probs: Vec<f64>,
        num_recommendations: usize,
        num_treatments: usize,
        compliance_types: Vec<ComplianceType>,
        mean_rewards: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        Environment::try_from(EnvironmentDoc {
            name: name.into(),
            context_probs,
            num_recommendations,
            num_treatments,
            compliance_types,
            mean_rewards,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn name(&self) -> &str {
        &self.doc.name
    }

    pub fn num_contexts(&self) -> usize {
        self.doc.context_probs.len()
    }

    pub fn num_recommendations(&self) -> usize {
        self.doc.num_recommendations
    }

    pub fn num_treatments(&self) -> usize {
        self.doc.num_treatments
    }

    pub fn context_probs(&self) -> &[f64] {
        &self.doc.context_probs
    }

    pub fn compliance_types(&self) -> &[ComplianceType] {
        &self.doc.compliance_types
    }

    pub fn mean_reward(&self, ty: usize, w: usize, x: usize) -> f64 {
        self.doc.mean_rewards[ty][w][x]
    }

    pub fn is_square(&self) -> bool {
        self.num_recommendations() == self.num_treatments()
    }

    pub fn num_actions(&self, space: ActionSpace) -> usize {
        match space {
            ActionSpace::Rec => self.num_recommendations(),
            ActionSpace::Trt => self.num_treatments(),
        }
    }

    /// `P(w)`: row `z` is the distribution of the treatment taken under recommendation `z`.
    pub fn compliance_matrix(&self, w: usize) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.num_recommendations(), self.num_treatments());
        for ty in self.compliance_types() {
            for (z, &x) in ty.map.iter().enumerate() {
                p[(z, x)] += ty.weights[w];
            }
        }
        p
    }

    /// `g(w)`: expected observed reward under each recommendation.
    pub fn itt_means(&self, w: usize) -> DVector<f64> {
        let mut g = DVector::zeros(self.num_recommendations());
        for (c, ty) in self.compliance_types().iter().enumerate() {
            for (z, &x) in ty.map.iter().enumerate() {
                g[z] += ty.weights[w] * self.mean_reward(c, w, x);
            }
        }
        g
    }

    /// `μ(w)`: expected potential reward of each treatment.
    pub fn structural_means(&self, w: usize) -> DVector<f64> {
        let mut mu = DVector::zeros(self.num_treatments());
        for (c, ty) in self.compliance_types().iter().enumerate() {
            for x in 0..self.num_treatments() {
                mu[x] += ty.weights[w] * self.mean_reward(c, w, x);
            }
        }
        mu
    }

    /// Exact value of a policy: REC policies are evaluated through the
    /// recommendation channel, TRT policies under direct assignment.
    pub fn policy_value(&self, policy: &Policy) -> Result<f64> {
        if policy.assignment.len() != self.num_contexts() {
            return Err(contract(format!(
                "policy has {} entries but environment has {} contexts",
                policy.assignment.len(),
                self.num_contexts()
            )));
        }
        let k = self.num_actions(policy.space);
        if policy.assignment.iter().any(|&a| a >= k) {
            return Err(contract("policy action out of range for its action space"));
        }
        let value = (0..self.num_contexts())
            .map(|w| {
                let local = match policy.space {
                    ActionSpace::Rec => self.itt_means(w),
                    ActionSpace::Trt => self.structural_means(w),
                };
                self.context_probs()[w] * local[policy.assignment[w]]
            })
            .sum();
        Ok(value)
    }

    /// True iff treatment contrasts do not depend on the compliance type
    /// (among types with positive weight) in every context.
    pub fn is_homogeneous(&self) -> bool {
        let kx = self.num_treatments();
        (0..self.num_contexts()).all(|w| {
            let present: Vec<usize> = (0..self.compliance_types().len())
                .filter(|&c| self.compliance_types()[c].weights[w] > 0.0)
                .collect();
            let Some(&first) = present.first() else {
                return true;
            };
            present.iter().all(|&c| {
                (1..kx).all(|x| {
                    let reference = self.mean_reward(first, w, x) - self.mean_reward(first, w, 0);
                    let contrast = self.mean_reward(c, w, x) - self.mean_reward(c, w, 0);
                    (reference - contrast).abs() <= PROB_TOL
                })
            })
        })
    }

    /// Draw `W ~ ν`.
    pub fn draw_context<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(self.context_probs().iter().copied(), rng)
    }

    /// Given the context and the learner's recommendation, draw the unit's
    /// compliance type, the realized treatment and a Bernoulli reward.
    pub fn realize<R: Rng + ?Sized>(&self, w: usize, z: usize, rng: &mut R) -> (usize, f64) {
        let c = sample_index(self.compliance_types().iter().map(|t| t.weights[w]), rng);
        let x = self.compliance_types()[c].map[z];
        let p = self.mean_reward(c, w, x);
        let y = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        (x, y)
    }

    /// One full round for a fixed recommendation: `(w, x, y)`.
    pub fn sample_round<R: Rng + ?Sized>(&self, rng: &mut R, z: usize) -> (usize, usize, f64) {
        let w = self.draw_context(rng);
        let (x, y) = self.realize(w, z, rng);
        (w, x, y)
    }

    /// Sub-design that keeps only the listed recommendation arms, in order.
    pub fn restrict_recommendations(&self, keep: &[usize]) -> Result<Environment> {
        if keep.is_empty() || keep.iter().any(|&z| z >= self.num_recommendations()) {
            return Err(contract("restriction must list valid recommendation indices"));
        }
        let types = self
            .compliance_types()
            .iter()
            .map(|t| ComplianceType {
                weights: t.weights.clone(),
                map: keep.iter().map(|&z| t.map[z]).collect(),
            })
            .collect();
        Environment::new(
            format!("{}[z={:?}]", self.name(), keep),
            self.context_probs().to_vec(),
            keep.len(),
            self.num_treatments(),
            types,
            self.doc.mean_rewards.clone(),
        )
    }
}

fn sample_index<R: Rng + ?Sized>(probs: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Which action space a policy maps contexts into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSpace {
    /// Recommendations (instruments) `Z`.
    Rec,
    /// Treatments `X`.
    Trt,
}

/// Deterministic map from contexts to actions of one space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    pub space: ActionSpace,
    pub assignment: Vec<usize>,
}

impl Policy {
    pub fn new(space: ActionSpace, assignment: Vec<usize>) -> Self {
        Policy { space, assignment }
    }

    pub fn constant(space: ActionSpace, action: usize, contexts: usize) -> Self {
        Policy::new(space, vec![action; contexts])
    }

    pub fn action(&self, w: usize) -> usize {
        self.assignment[w]
    }
}

/// All `num_actions^S` deterministic policies in lexicographic order
/// (context 0 is the most significant digit).
pub fn enumerate_policies(s: usize, num_actions: usize, space: ActionSpace) -> Result<Vec<Policy>> {
    let too_large = || BraceError::PolicySpaceTooLarge {
        actions: num_actions,
        contexts: s,
        limit: MAX_POLICIES,
    };
    let count = u32::try_from(s)
        .ok()
        .and_then(|e| num_actions.checked_pow(e))
        .ok_or_else(too_large)?;
    if count > MAX_POLICIES {
        return Err(too_large());
    }
    let mut out = Vec::with_capacity(count);
    for mut code in 0..count {
        let mut assignment = vec![0; s];
        for w in (0..s).rev() {
            assignment[w] = code % num_actions;
            code /= num_actions;
        }
        out.push(Policy::new(space, assignment));
    }
    Ok(out)
}

/// Oracle summary of an environment.
#[derive(Clone, Debug, Serialize)]
pub struct EnvDiagnostics {
    pub rec_gap: f64,
    pub str_gap: f64,
    /// `max_w ‖P(w)⁻¹‖_∞`, square invertible environments only.
    pub inv_norm_max: Option<f64>,
    /// `max_w` of the ℓ∞ norm of the identification (left) inverse; equals
    /// `inv_norm_max` when square.
    pub identification_norm_max: Option<f64>,
    pub nu_min: f64,
    pub homogeneous: bool,
    pub invertible: bool,
    pub rec_opt: Policy,
    pub str_opt: Policy,
    pub rec_opt_value: f64,
    pub str_opt_value: f64,
}

/// Best policy (lowest index on ties), its value, and the gap to the runner-up.
pub fn optimum(env: &Environment, space: ActionSpace) -> Result<(Policy, f64, f64)> {
    let policies = enumerate_policies(env.num_contexts(), env.num_actions(space), space)?;
    let values = policies
        .iter()
        .map(|p| env.policy_value(p))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax(&values);
    let runner_up = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = if runner_up.is_finite() { values[best] - runner_up } else { 0.0 };
    Ok((policies[best].clone(), values[best], gap.max(0.0)))
}

/// Index of the maximum; lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn diagnostics(env: &Environment) -> Result<EnvDiagnostics> {
    let (rec_opt, rec_opt_value, rec_gap) = optimum(env, ActionSpace::Rec)?;
    let (str_opt, str_opt_value, str_gap) = optimum(env, ActionSpace::Trt)?;
    let inverses: Option<Vec<DMatrix<f64>>> = (0..env.num_contexts())
        .map(|w| linalg::identification_inverse(&env.compliance_matrix(w)))
        .collect();
    let identification_norm_max = inverses
        .as_ref()
        .map(|inv| inv.iter().map(linalg::inf_norm).fold(0.0, f64::max));
    let invertible = env.is_square() && inverses.is_some();
    Ok(EnvDiagnostics {
        rec_gap,
        str_gap,
        inv_norm_max: if invertible { identification_norm_max } else { None },
        identification_norm_max,
        nu_min: env.context_probs().iter().copied().fold(f64::INFINITY, f64::min),
        homogeneous: env.is_homogeneous(),
        invertible,
        rec_opt,
        str_opt,
        rec_opt_value,
        str_opt_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn private_signal() -> Environment {
        // type 0 carries signal 0, type 1 carries signal 1; rec 0 defers, rec 1 defaults to 0
        Environment::new(
            "private_signal",
            vec![1.0],
            2,
            2,
            vec![
                ComplianceType { weights: vec![0.5], map: vec![0, 0] },
                ComplianceType { weights: vec![0.5], map: vec![1, 0] },
            ],
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
        )
        .unwrap()
    }

    fn direct_control() -> Environment {
        Environment::new(
            "direct",
            vec![1.0],
            2,
            2,
            vec![ComplianceType { weights: vec![1.0], map: vec![0, 1] }],
            vec![vec![vec![0.3, 0.8]]],
        )
        .unwrap()
    }

    fn two_by_two(name: &str, p_rows: [[f64; 2]; 2], mu: [f64; 2]) -> Environment {
        // compliers + always-takers reproducing any 2×2 P with P[0][0] >= P[1][0]
        let complier = p_rows[0][0] - p_rows[1][0];
        let always0 = p_rows[1][0];
        let always1 = p_rows[0][1];
        let means = vec![vec![mu.to_vec()]; 3];
        Environment::new(
            name,
            vec![1.0],
            2,
            2,
            vec![
                ComplianceType { weights: vec![complier], map: vec![0, 1] },
                ComplianceType { weights: vec![always0], map: vec![0, 0] },
                ComplianceType { weights: vec![always1], map: vec![1, 1] },
            ],
            means,
        )
        .unwrap()
    }

    #[test]
    fn private_signal_population_quantities() {
        let env = private_signal();
        let p = env.compliance_matrix(0);
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 1.0, 0.0]));
        assert_eq!(env.itt_means(0).as_slice(), &[1.0, 0.5]);
        assert_eq!(env.structural_means(0).as_slice(), &[0.5, 0.5]);
        let rec_a = Policy::constant(ActionSpace::Rec, 0, 1);
        assert_eq!(env.policy_value(&rec_a).unwrap(), 1.0);
        let d = diagnostics(&env).unwrap();
        assert!(!d.homogeneous);
        assert_eq!(d.str_gap, 0.0);
        assert_eq!(d.rec_opt_value, 1.0);
        assert_eq!(d.str_opt_value, 0.5);
    }

    #[test]
    fn direct_control_is_identity_and_collapses_objectives() {
        let env = direct_control();
        assert_eq!(env.compliance_matrix(0), DMatrix::identity(2, 2));
        assert_eq!(env.itt_means(0), env.structural_means(0));
        let d = diagnostics(&env).unwrap();
        assert!(d.invertible && d.homogeneous);
        assert_abs_diff_eq!(d.inv_norm_max.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn workflow_style_itt_means() {
        // μ=(0.3,0.9) with rows (0.7,0.3)/(0.35,0.65): g = (0.48, 0.69)
        let env = two_by_two("wf", [[0.7, 0.3], [0.35, 0.65]], [0.3, 0.9]);
        let g = env.itt_means(0);
        assert_abs_diff_eq!(g[0], 0.48, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], 0.69, epsilon = 1e-12);
    }

    #[test]
    fn strong_iv_construction_diagnostics() {
        let env = two_by_two("strong", [[0.9, 0.1], [0.1, 0.9]], [0.3, 0.7]);
        let d = diagnostics(&env).unwrap();
        assert_abs_diff_eq!(d.inv_norm_max.unwrap(), 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(d.str_gap, 0.4, epsilon = 1e-12);
        assert!(d.homogeneous);
    }

    #[test]
    fn homogeneous_env_satisfies_iv_identity() {
        let env = two_by_two("strong", [[0.9, 0.1], [0.1, 0.9]], [0.3, 0.7]);
        let lhs = env.compliance_matrix(0) * env.structural_means(0);
        assert!((lhs - env.itt_means(0)).amax() <= 1e-12);
    }

    #[test]
    fn enumeration_sizes_and_order() {
        assert_eq!(enumerate_policies(1, 2, ActionSpace::Rec).unwrap().len(), 2);
        assert_eq!(enumerate_policies(2, 3, ActionSpace::Rec).unwrap().len(), 9);
        let p = enumerate_policies(3, 2, ActionSpace::Trt).unwrap();
        assert_eq!(p.len(), 8);
        assert_eq!(p[0].assignment, vec![0, 0, 0]);
        assert_eq!(p[1].assignment, vec![0, 0, 1]);
        assert_eq!(p[7].assignment, vec![1, 1, 1]);
        assert!(matches!(
            enumerate_policies(17, 2, ActionSpace::Rec),
            Err(BraceError::PolicySpaceTooLarge { .. })
        ));
    }

    #[test]
    fn policy_value_rejects_dimension_mismatch() {
        let env = direct_control();
        let bad = Policy::new(ActionSpace::Rec, vec![0, 1]);
        assert!(matches!(env.policy_value(&bad), Err(BraceError::Contract(_))));
        let out_of_range = Policy::new(ActionSpace::Trt, vec![2]);
        assert!(env.policy_value(&out_of_range).is_err());
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let ty = || vec![ComplianceType { weights: vec![1.0], map: vec![0, 1] }];
        let means = || vec![vec![vec![0.5, 0.5]]];
        assert!(Environment::new("x", vec![0.5], 2, 2, ty(), means()).is_err());
        assert!(Environment::new("x", vec![1.0], 2, 1, ty(), means()).is_err());
        assert!(Environment::new("x", vec![1.0], 2, 2, ty(), vec![vec![vec![1.5, 0.5]]]).is_err());
        let half = vec![ComplianceType { weights: vec![0.5], map: vec![0, 1] }];
        assert!(Environment::new("x", vec![1.0], 2, 2, half, means()).is_err());
    }

    #[test]
    fn sampling_respects_compliance_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let direct = direct_control();
        let private = private_signal();
        for _ in 0..1000 {
            let z = rng.random_range(0..2);
            let (_, x, _) = direct.sample_round(&mut rng, z);
            assert_eq!(x, z);
            let (_, x, _) = private.sample_round(&mut rng, 1);
            assert_eq!(x, 0);
        }
    }

    #[test]
    fn empirical_itt_mean_within_clt_band() {
        let env = two_by_two("wf", [[0.7, 0.3], [0.35, 0.65]], [0.3, 0.9]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let total: f64 = (0..n).map(|_| env.sample_round(&mut rng, 1).2).sum();
        let g = env.itt_means(0)[1];
        let band = 3.0 * (g * (1.0 - g) / n as f64).sqrt();
        assert!((total / n as f64 - g).abs() <= band);
    }

    #[test]
    fn identical_seeds_give_identical_streams() {
        let env = private_signal();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|t| env.sample_round(&mut rng, t % 2)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let env = private_signal();
        let text = env.to_json().unwrap();
        assert_eq!(Environment::from_json(&text).unwrap(), env);
        let broken = text.replace("\"num_treatments\": 2", "\"num_treatments\": 1");
        assert!(Environment::from_json(&broken).is_err());
    }

    #[test]
    fn restriction_keeps_selected_rows() {
        let env = private_signal();
        let sub = env.restrict_recommendations(&[1]).unwrap();
        assert_eq!(sub.num_recommendations(), 1);
        assert_eq!(sub.compliance_matrix(0).row(0), env.compliance_matrix(0).row(1));
    }
}
