//! The twelve-scenario benchmark catalog.
//!
//! Every scenario is a small finite-context population built so that its exact
//! oracle values hit the published target numbers. The remaining free
//! parameters (compliance strength, reward levels) are pinned here and
//! checked by [`verify_scenario`] before any run uses them.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{BraceError, Result};
use crate::linalg;
use crate::model::{diagnostics, ActionSpace, ComplianceType, Environment, Policy};

const TARGET_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    DirectControl,
    StrongIvEasy,
    PrivateSignal,
    WeakIvAbstain,
    WeakIvSmallGap,
    HomogeneityViolation,
    Tradeoff,
    WorkflowRedesign,
    ActualTreatmentTrap,
    RareContext,
    RectOveridentified,
    WeakIvRescued,
}

impl Scenario {
    pub const ALL: [Scenario; 12] = [
        Scenario::DirectControl,
        Scenario::StrongIvEasy,
        Scenario::PrivateSignal,
        Scenario::WeakIvAbstain,
        Scenario::WeakIvSmallGap,
        Scenario::HomogeneityViolation,
        Scenario::Tradeoff,
        Scenario::WorkflowRedesign,
        Scenario::ActualTreatmentTrap,
        Scenario::RareContext,
        Scenario::RectOveridentified,
        Scenario::WeakIvRescued,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::DirectControl => "direct_control",
            Scenario::StrongIvEasy => "strong_iv_easy",
            Scenario::PrivateSignal => "private_signal",
            Scenario::WeakIvAbstain => "weak_iv_abstain",
            Scenario::WeakIvSmallGap => "weak_iv_small_gap",
            Scenario::HomogeneityViolation => "homogeneity_violation",
            Scenario::Tradeoff => "tradeoff",
            Scenario::WorkflowRedesign => "workflow_redesign",
            Scenario::ActualTreatmentTrap => "actual_treatment_trap",
            Scenario::RareContext => "rare_context",
            Scenario::RectOveridentified => "rect_overidentified",
            Scenario::WeakIvRescued => "weak_iv_rescued",
        }
    }

    pub fn default_horizon(self) -> usize {
        match self {
            Scenario::WeakIvAbstain
            | Scenario::WeakIvSmallGap
            | Scenario::RareContext
            | Scenario::WeakIvRescued => 4096,
            _ => 2048,
        }
    }

    pub fn build(self) -> Environment {
        let env = match self {
            Scenario::DirectControl => direct_control(),
            Scenario::StrongIvEasy => one_context(
                self,
                2,
                &[
                    (0.8, &[0, 1], &[0.1, 0.9]),
                    (0.1, &[0, 0], &[0.1, 0.9]),
                    (0.1, &[1, 1], &[0.1, 0.9]),
                ],
            ),
            Scenario::PrivateSignal => one_context(
                self,
                2,
                // the downstream actor sees a private signal; rec 0 defers to it
                &[(0.5, &[0, 0], &[1.0, 0.0]), (0.5, &[1, 0], &[0.0, 1.0])],
            ),
            Scenario::WeakIvAbstain => weak_square(self, [0.2, 0.8]),
            Scenario::WeakIvSmallGap => weak_square(self, [0.48, 0.52]),
            Scenario::HomogeneityViolation => one_context(
                self,
                2,
                &[(0.5, &[0, 1], &[0.0, 0.9]), (0.5, &[0, 0], &[1.0, 0.0])],
            ),
            Scenario::Tradeoff => one_context(
                self,
                2,
                &[
                    (0.7, &[1, 0], &[0.4, 0.9]),
                    (0.2, &[1, 1], &[0.4, 0.9]),
                    (0.1, &[0, 0], &[0.4, 0.9]),
                ],
            ),
            Scenario::WorkflowRedesign => one_context(
                self,
                2,
                &[(23.0 / 30.0, &[0, 1], &[0.0, 0.9]), (7.0 / 30.0, &[0, 0], &[0.0, 0.9])],
            ),
            Scenario::ActualTreatmentTrap => one_context(
                self,
                2,
                &[
                    (0.4, &[0, 1], &[0.6, 0.975]),
                    (0.18, &[1, 1], &[0.0, 0.0]),
                    (0.42, &[0, 0], &[1.0, 1.0]),
                ],
            ),
            Scenario::RareContext => rare_context(),
            Scenario::RectOveridentified => one_context(
                self,
                2,
                &[
                    (0.8, &[0, 1, 1], &[0.05, 0.95]),
                    (0.1, &[0, 0, 1], &[0.05, 0.95]),
                    (0.1, &[1, 1, 1], &[0.05, 0.95]),
                ],
            ),
            Scenario::WeakIvRescued => one_context(
                self,
                2,
                &[
                    (0.1, &[0, 1, 1], &[0.05, 0.95]),
                    (0.45, &[0, 0, 1], &[0.05, 0.95]),
                    (0.45, &[1, 1, 1], &[0.05, 0.95]),
                ],
            ),
        };
        env.expect("catalog scenarios are valid by construction")
    }

    /// Recommendation arms forming the square sub-design, when the scenario
    /// defines one.
    pub fn square_subdesign(self) -> Option<&'static [usize]> {
        match self {
            Scenario::WeakIvRescued | Scenario::RectOveridentified => Some(&[0, 1]),
            _ => None,
        }
    }

    pub fn spec(self) -> ScenarioSpec {
        use Comparison::*;
        use Quantity::*;
        let t = |quantity, comparison| Target { quantity, comparison };
        let (targets, flags) = match self {
            Scenario::DirectControl => (
                vec![t(BestRec, Equals(0.775)), t(BestTrt, Equals(0.775))],
                Flags::square(true, true),
            ),
            Scenario::StrongIvEasy => (
                vec![t(InvNormMax, Equals(1.25)), t(StrGap, AtLeast(0.4))],
                Flags::square(true, true),
            ),
            Scenario::PrivateSignal => (
                vec![t(BestRec, Equals(1.0)), t(BestTrt, Equals(0.5))],
                Flags::square(false, true),
            ),
            Scenario::WeakIvAbstain => (
                vec![t(InvNormMax, AtLeast(10.0)), t(StrGap, AtLeast(0.4))],
                Flags::square(true, true),
            ),
            Scenario::WeakIvSmallGap => (
                vec![t(InvNormMax, AtLeast(10.0)), t(StrGap, AtMost(0.05))],
                Flags::square(true, true),
            ),
            Scenario::HomogeneityViolation => (
                vec![t(BestRec, Equals(0.95)), t(NaivePluginTrtValue, Equals(0.45))],
                Flags::square(false, true),
            ),
            Scenario::Tradeoff => (
                vec![t(BestRec, Equals(0.85)), t(BestTrt, Equals(0.9))],
                Flags::square(true, true),
            ),
            Scenario::WorkflowRedesign => (
                vec![t(BestRec, Equals(0.69)), t(BestTrt, Equals(0.9))],
                Flags::square(true, true),
            ),
            Scenario::ActualTreatmentTrap => (
                vec![
                    t(BestRec, Equals(0.81)),
                    t(RecPolicyValue(vec![0]), Equals(0.66)),
                ],
                Flags::square(false, true),
            ),
            Scenario::RareContext => (vec![t(NuMin, Equals(0.05))], Flags::square(true, true)),
            Scenario::RectOveridentified => (
                vec![t(IdentificationNormMax, AtMost(1.5))],
                Flags::rectangular(3, 2),
            ),
            Scenario::WeakIvRescued => (
                vec![
                    t(SubDesignInvNormMax(vec![0, 1]), AtLeast(10.0)),
                    t(IdentificationNormMax, AtMost(3.0)),
                ],
                Flags::rectangular(3, 2),
            ),
        };
        ScenarioSpec {
            scenario: self,
            default_horizon: self.default_horizon(),
            targets,
            flags,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = BraceError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| BraceError::UnknownScenario {
                name: s.to_string(),
                valid: Scenario::ALL.map(Scenario::as_str).join(", "),
            })
    }
}

pub fn build_scenario(name: &str) -> Result<Environment> {
    Ok(name.parse::<Scenario>()?.build())
}

type TypeSpec<'a> = (f64, &'a [usize], &'a [f64]);

fn one_context(sc: Scenario, kx: usize, types: &[TypeSpec<'_>]) -> Result<Environment> {
    let kz = types[0].1.len();
    Environment::new(
        sc.as_str(),
        vec![1.0],
        kz,
        kx,
        types
            .iter()
            .map(|&(w, map, _)| ComplianceType { weights: vec![w], map: map.to_vec() })
            .collect(),
        types.iter().map(|&(_, _, m)| vec![m.to_vec()]).collect(),
    )
}

/// Rows (0.55, 0.45) / (0.45, 0.55): `‖P⁻¹‖_∞ = 10`.
fn weak_square(sc: Scenario, mu: [f64; 2]) -> Result<Environment> {
    one_context(
        sc,
        2,
        &[(0.1, &[0, 1], &mu), (0.45, &[0, 0], &mu), (0.45, &[1, 1], &mu)],
    )
}

fn direct_control() -> Result<Environment> {
    Environment::new(
        Scenario::DirectControl.as_str(),
        vec![0.5, 0.5],
        2,
        2,
        vec![ComplianceType { weights: vec![1.0, 1.0], map: vec![0, 1] }],
        vec![vec![vec![0.85, 0.6], vec![0.45, 0.7]]],
    )
}

fn rare_context() -> Result<Environment> {
    let means = vec![vec![0.2, 0.8], vec![0.7, 0.3]];
    Environment::new(
        Scenario::RareContext.as_str(),
        vec![0.95, 0.05],
        2,
        2,
        vec![
            ComplianceType { weights: vec![0.8, 0.8], map: vec![0, 1] },
            ComplianceType { weights: vec![0.1, 0.1], map: vec![0, 0] },
            ComplianceType { weights: vec![0.1, 0.1], map: vec![1, 1] },
        ],
        vec![means; 3],
    )
}

/// Oracle quantity a scenario target refers to.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    BestRec,
    BestTrt,
    RecGap,
    StrGap,
    InvNormMax,
    IdentificationNormMax,
    NuMin,
    /// True TRT value of the treatment policy that maximizes `P⁻¹g` per context.
    NaivePluginTrtValue,
    RecPolicyValue(Vec<usize>),
    SubDesignInvNormMax(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Equals(f64),
    AtLeast(f64),
    AtMost(f64),
}

impl Comparison {
    pub fn holds(self, value: f64) -> bool {
        match self {
            Comparison::Equals(t) => (value - t).abs() <= TARGET_TOL,
            Comparison::AtLeast(t) => value >= t - TARGET_TOL,
            Comparison::AtMost(t) => value <= t + TARGET_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Target {
    pub quantity: Quantity,
    pub comparison: Comparison,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::BestRec => f.write_str("best_rec"),
            Quantity::BestTrt => f.write_str("best_trt"),
            Quantity::RecGap => f.write_str("rec_gap"),
            Quantity::StrGap => f.write_str("str_gap"),
            Quantity::InvNormMax => f.write_str("inv_norm_max"),
            Quantity::IdentificationNormMax => f.write_str("identification_norm_max"),
            Quantity::NuMin => f.write_str("nu_min"),
            Quantity::NaivePluginTrtValue => f.write_str("naive_plugin_trt"),
            Quantity::RecPolicyValue(p) => write!(f, "rec_value{p:?}"),
            Quantity::SubDesignInvNormMax(keep) => write!(f, "inv_norm_max{keep:?}"),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.comparison {
            Comparison::Equals(t) => write!(f, "{}={t}", self.quantity),
            Comparison::AtLeast(t) => write!(f, "{}>={t}", self.quantity),
            Comparison::AtMost(t) => write!(f, "{}<={t}", self.quantity),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Flags {
    pub homogeneous: bool,
    pub invertible: bool,
    pub num_recommendations: usize,
    pub num_treatments: usize,
}

impl Flags {
    fn square(homogeneous: bool, invertible: bool) -> Self {
        Flags { homogeneous, invertible, num_recommendations: 2, num_treatments: 2 }
    }

    fn rectangular(kz: usize, kx: usize) -> Self {
        Flags { homogeneous: true, invertible: false, num_recommendations: kz, num_treatments: kx }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub default_horizon: usize,
    pub targets: Vec<Target>,
    pub flags: Flags,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckEntry {
    pub label: String,
    pub value: f64,
    pub expected: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub entries: Vec<CheckEntry>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

pub fn oracle_quantity(env: &Environment, q: &Quantity) -> Result<f64> {
    let d = diagnostics(env)?;
    let nan = f64::NAN;
    Ok(match q {
        Quantity::BestRec => d.rec_opt_value,
        Quantity::BestTrt => d.str_opt_value,
        Quantity::RecGap => d.rec_gap,
        Quantity::StrGap => d.str_gap,
        Quantity::InvNormMax => d.inv_norm_max.unwrap_or(nan),
        Quantity::IdentificationNormMax => d.identification_norm_max.unwrap_or(nan),
        Quantity::NuMin => d.nu_min,
        Quantity::NaivePluginTrtValue => {
            let mut assignment = Vec::with_capacity(env.num_contexts());
            for w in 0..env.num_contexts() {
                let Some(inv) = linalg::identification_inverse(&env.compliance_matrix(w)) else {
                    return Ok(nan);
                };
                let mu_hat = inv * env.itt_means(w);
                assignment.push(crate::model::argmax(mu_hat.as_slice()));
            }
            env.policy_value(&Policy::new(ActionSpace::Trt, assignment))?
        }
        Quantity::RecPolicyValue(a) => {
            env.policy_value(&Policy::new(ActionSpace::Rec, a.clone()))?
        }
        Quantity::SubDesignInvNormMax(keep) => {
            let sub = env.restrict_recommendations(keep)?;
            diagnostics(&sub)?.inv_norm_max.unwrap_or(f64::INFINITY)
        }
    })
}

/// Check every named target and qualitative flag of a scenario against the
/// environment's oracle.
pub fn verify_scenario(env: &Environment, spec: &ScenarioSpec) -> Result<VerificationReport> {
    let mut entries = Vec::new();
    for target in &spec.targets {
        let value = oracle_quantity(env, &target.quantity)?;
        entries.push(CheckEntry {
            label: format!("{:?}", target.quantity),
            value,
            expected: format!("{:?}", target.comparison),
            pass: target.comparison.holds(value),
        });
    }
    let d = diagnostics(env)?;
    let flag = |label: &str, value: bool, expected: bool| CheckEntry {
        label: label.to_string(),
        value: f64::from(u8::from(value)),
        expected: expected.to_string(),
        pass: value == expected,
    };
    entries.push(flag("homogeneous", d.homogeneous, spec.flags.homogeneous));
    entries.push(flag("invertible", d.invertible, spec.flags.invertible));
    let dims = |label: &str, value: usize, expected: usize| CheckEntry {
        label: label.to_string(),
        value: value as f64,
        expected: expected.to_string(),
        pass: value == expected,
    };
    entries.push(dims("num_recommendations", env.num_recommendations(), spec.flags.num_recommendations));
    entries.push(dims("num_treatments", env.num_treatments(), spec.flags.num_treatments));
    Ok(VerificationReport { scenario: env.name().to_string(), entries })
}
