use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::partial_id::partial_id_interval;
use super::radii::Radii;
use super::stats::PhaseStats;
use crate::error::{contract, Result};
use crate::linalg;
use crate::model::{ActionSpace, Policy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const FULL: Interval = Interval { lo: 0.0, hi: 1.0 };

    /// `[center − half, center + half] ∩ [0, 1]`; both endpoints are clipped
    /// so the result is never inverted.
    pub fn clipped(center: f64, half: f64) -> Interval {
        let lo = (center - half).clamp(0.0, 1.0);
        let hi = (center + half).clamp(0.0, 1.0);
        Interval { lo, hi: hi.max(lo) }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certification {
    pub certified: bool,
    /// ℓ∞ norm of the (left) inverse, when the matrix is invertible.
    pub inv_norm: Option<f64>,
}

/// Certify a context: `P̂` must be invertible and `‖P̂⁻¹‖_∞ · a ≤ 1/2`.
///
/// Tall matrices are certified through their least-squares left inverse.
pub fn certify(p_hat: Option<&DMatrix<f64>>, a_w: f64) -> Certification {
    let inv_norm = p_hat
        .and_then(linalg::identification_inverse)
        .map(|inv| linalg::inf_norm(&inv));
    Certification {
        certified: inv_norm.is_some_and(|n| n * a_w <= 0.5),
        inv_norm,
    }
}

/// Uncertified plug-in solve `P̂⁻¹ ĝ`; `None` when `P̂` is singular or wide.
pub fn plugin_solve(p_hat: &DMatrix<f64>, g_hat: &DVector<f64>) -> Option<DVector<f64>> {
    linalg::identification_inverse(p_hat).map(|inv| inv * g_hat)
}

/// Certified plug-in structural means and their ℓ∞ half-width
/// `c = ‖P̂⁻¹‖_∞ (a_w + b_max)`. The estimate is not clipped.
pub fn plugin_mu(
    p_hat: &DMatrix<f64>,
    g_hat: &DVector<f64>,
    a_w: f64,
    b_max: f64,
) -> Result<(DVector<f64>, f64)> {
    let inv = linalg::identification_inverse(p_hat)
        .ok_or_else(|| contract("plug-in inversion requested for a singular compliance matrix"))?;
    let norm = linalg::inf_norm(&inv);
    if norm * a_w > 0.5 {
        return Err(contract("plug-in inversion requested for an uncertified context"));
    }
    Ok((inv * g_hat, norm * (a_w + b_max)))
}

/// How structural local intervals are built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralMode {
    /// Certified plug-in inversion, full range otherwise.
    PointId,
    /// Feasible-set bounds from the moment constraints.
    PartialId,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalIntervals {
    /// `[w][z]`
    pub rec: Vec<Vec<Interval>>,
    /// `[w][x]`
    pub structural: Vec<Vec<Interval>>,
    pub certified: Vec<bool>,
    pub inv_norm: Vec<Option<f64>>,
    pub half_width: Vec<Option<f64>>,
    pub mu_hat: Vec<Option<Vec<f64>>>,
    /// Contexts whose partial-identification feasible set was empty.
    pub infeasible: Vec<bool>,
}

impl LocalIntervals {
    pub fn build(stats: &PhaseStats, radii: &Radii, mode: StructuralMode) -> LocalIntervals {
        let dims = stats.dims;
        let mut out = LocalIntervals {
            rec: Vec::with_capacity(dims.contexts),
            structural: Vec::with_capacity(dims.contexts),
            certified: Vec::with_capacity(dims.contexts),
            inv_norm: Vec::with_capacity(dims.contexts),
            half_width: Vec::with_capacity(dims.contexts),
            mu_hat: Vec::with_capacity(dims.contexts),
            infeasible: vec![false; dims.contexts],
        };
        for w in 0..dims.contexts {
            out.rec.push(
                (0..dims.recommendations)
                    .map(|z| match stats.g_hat(w, z) {
                        Some(g) => Interval::clipped(g, radii.b[w][z]),
                        None => Interval::FULL,
                    })
                    .collect(),
            );

            let p_hat = stats.p_hat(w);
            let cert = certify(p_hat.as_ref(), radii.a_max[w]);
            out.certified.push(cert.certified);
            out.inv_norm.push(cert.inv_norm);

            let point = match (cert.certified, p_hat.as_ref(), stats.g_hat_vec(w)) {
                (true, Some(p), Some(g)) => plugin_mu(p, &g, radii.a_max[w], radii.b_max[w]).ok(),
                _ => None,
            };
            out.half_width.push(point.as_ref().map(|(_, c)| *c));
            out.mu_hat.push(point.as_ref().map(|(mu, _)| mu.as_slice().to_vec()));

            let structural = match mode {
                StructuralMode::PointId => match &point {
                    Some((mu, c)) => mu.iter().map(|&m| Interval::clipped(m, *c)).collect(),
                    None => vec![Interval::FULL; dims.treatments],
                },
                StructuralMode::PartialId => {
                    let rows: Vec<Option<DVector<f64>>> =
                        (0..dims.recommendations).map(|z| stats.p_hat_row(w, z)).collect();
                    let g: Vec<Option<f64>> =
                        (0..dims.recommendations).map(|z| stats.g_hat(w, z)).collect();
                    let slack: Vec<f64> =
                        (0..dims.recommendations).map(|z| radii.a[w][z] + radii.b[w][z]).collect();
                    let mut infeasible = false;
                    let ints = (0..dims.treatments)
                        .map(|x| {
                            let res = partial_id_interval(&rows, &g, &slack, x);
                            infeasible |= res.infeasible;
                            res.interval
                        })
                        .collect();
                    out.infeasible[w] = infeasible;
                    ints
                }
            };
            out.structural.push(structural);
        }
        out
    }

    pub fn family(&self, space: ActionSpace) -> &[Vec<Interval>] {
        match space {
            ActionSpace::Rec => &self.rec,
            ActionSpace::Trt => &self.structural,
        }
    }

    pub fn certified_share(&self) -> f64 {
        if self.certified.is_empty() {
            return 0.0;
        }
        self.certified.iter().filter(|&&c| c).count() as f64 / self.certified.len() as f64
    }
}

/// Per-policy lower and upper confidence bounds, aligned with `policies`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyBounds {
    pub space: ActionSpace,
    pub lcb: Vec<f64>,
    pub ucb: Vec<f64>,
}

impl PolicyBounds {
    pub fn len(&self) -> usize {
        self.lcb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lcb.is_empty()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.ucb[i] - self.lcb[i]
    }

    pub fn covers(&self, i: usize, value: f64) -> bool {
        self.lcb[i] <= value && value <= self.ucb[i]
    }
}

/// Context weights used to aggregate local intervals.
#[derive(Clone, Copy, Debug)]
pub enum ContextWeights<'a> {
    /// Empirical frequencies, widened by `η`.
    Estimated { nu_hat: &'a [f64], eta: f64 },
    /// The true marginal; no `η` correction is needed.
    Known(&'a [f64]),
}

/// Aggregate local intervals into policy bounds. Bounds are not clipped.
pub fn policy_bounds(
    family: &[Vec<Interval>],
    weights: ContextWeights<'_>,
    space: ActionSpace,
    policies: &[Policy],
) -> PolicyBounds {
    let (nu, eta) = match weights {
        ContextWeights::Estimated { nu_hat, eta } => (nu_hat, eta),
        ContextWeights::Known(nu) => (nu, 0.0),
    };
    let mut lcb = Vec::with_capacity(policies.len());
    let mut ucb = Vec::with_capacity(policies.len());
    for policy in policies {
        let (mut lo, mut hi) = (0.0, 0.0);
        for (w, &a) in policy.assignment.iter().enumerate() {
            lo += nu[w] * family[w][a].lo;
            hi += nu[w] * family[w][a].hi;
        }
        lcb.push(lo - eta);
        ucb.push(hi + eta);
    }
    PolicyBounds { space, lcb, ucb }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn certification_examples() {
        let id = DMatrix::identity(2, 2);
        let c = certify(Some(&id), 0.4);
        assert!(c.certified);
        assert_abs_diff_eq!(c.inv_norm.unwrap(), 1.0);

        // ‖P̂⁻¹‖ = (0.55 + 0.45) / 0.1 = 10, 10 · 0.1 > 0.5
        let weak = m(2, 2, &[0.55, 0.45, 0.45, 0.55]);
        let c = certify(Some(&weak), 0.1);
        assert!(!c.certified);
        assert_abs_diff_eq!(c.inv_norm.unwrap(), 10.0, epsilon = 1e-9);

        let singular = m(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!(!certify(Some(&singular), 0.0).certified);
        assert!(!certify(None, 0.0).certified);
    }

    #[test]
    fn plugin_examples() {
        let g = DVector::from_vec(vec![0.3, 0.6]);
        let (mu, c) = plugin_mu(&DMatrix::identity(2, 2), &g, 0.1, 0.2).unwrap();
        assert_eq!(mu, g);
        assert_abs_diff_eq!(c, 0.3);

        // P⁻¹ = [[0, 1], [2, −1]] sends g = (1, 0.5) outside [0, 1]
        let p = m(2, 2, &[0.5, 0.5, 1.0, 0.0]);
        let mu = plugin_solve(&p, &DVector::from_vec(vec![1.0, 0.5])).unwrap();
        assert_abs_diff_eq!(mu[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], 1.5, epsilon = 1e-12);

        let strong = m(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        let g = &strong * DVector::from_vec(vec![0.3, 0.7]);
        let (mu, _) = plugin_mu(&strong, &g, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(mu[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(mu[1], 0.7, epsilon = 1e-12);
    }

    #[test]
    fn plugin_rejects_singular_and_uncertified() {
        let g = DVector::from_vec(vec![0.3, 0.6]);
        assert!(plugin_mu(&m(2, 2, &[0.5, 0.5, 0.5, 0.5]), &g, 0.0, 0.0).is_err());
        assert!(plugin_mu(&m(2, 2, &[0.55, 0.45, 0.45, 0.55]), &g, 0.1, 0.0).is_err());
    }

    #[test]
    fn clipping_semantics() {
        assert_eq!(Interval::clipped(0.95, 0.1), Interval { lo: 0.85, hi: 1.0 });
        let i = Interval::clipped(1.5, 0.2);
        assert_eq!(i, Interval { lo: 1.0, hi: 1.0 });
        let j = Interval::clipped(0.5, 0.2);
        assert_abs_diff_eq!(j.lo, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(j.hi, 0.7, epsilon = 1e-12);
        assert_eq!(Interval::clipped(-0.6, 0.2), Interval { lo: 0.0, hi: 0.0 });
    }

    #[test]
    fn aggregation_examples() {
        let policies = vec![Policy::new(ActionSpace::Rec, vec![0, 0])];
        let family = vec![
            vec![Interval { lo: 0.4, hi: 0.6 }],
            vec![Interval { lo: 0.2, hi: 0.8 }],
        ];
        let nu = [0.5, 0.5];
        let b = policy_bounds(
            &family,
            ContextWeights::Estimated { nu_hat: &nu, eta: 0.05 },
            ActionSpace::Rec,
            &policies,
        );
        assert_abs_diff_eq!(b.lcb[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(b.ucb[0], 0.75, epsilon = 1e-12);

        let known = policy_bounds(&family, ContextWeights::Known(&nu), ActionSpace::Rec, &policies);
        assert_abs_diff_eq!(known.lcb[0], 0.3, epsilon = 1e-12);

        // vacuous information is not clipped
        let full = vec![vec![Interval::FULL; 2]];
        let one = vec![Policy::new(ActionSpace::Trt, vec![1])];
        let b = policy_bounds(
            &full,
            ContextWeights::Estimated { nu_hat: &[1.0], eta: 0.2 },
            ActionSpace::Trt,
            &one,
        );
        assert_abs_diff_eq!(b.lcb[0], -0.2);
        assert_abs_diff_eq!(b.ucb[0], 1.2);
    }
}
