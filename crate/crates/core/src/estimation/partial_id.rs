//! Interval bounds on one structural mean from the moment constraints
//! `|P̂_z · μ − ĝ_z| ≤ slack_z`, `μ ∈ [0, 1]^{K_x}`.
//!
//! The feasible set is a bounded polytope, so both extremes of `μ_x` are
//! attained at vertices. With at most three treatments the vertices are
//! enumerated directly: every choice of `K_x` active hyperplanes is solved
//! and kept if it satisfies all constraints.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::intervals::Interval;

const FEAS_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartialIdResult {
    pub interval: Interval,
    /// The constraints admit no point in the box: evidence against the model.
    pub infeasible: bool,
}

struct HalfSpace {
    normal: Vec<f64>,
    bound: f64,
}

fn constraints(rows: &[Option<DVector<f64>>], g: &[Option<f64>], slack: &[f64], k: usize) -> Vec<HalfSpace> {
    let mut out = Vec::new();
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        out.push(HalfSpace { normal: e.clone(), bound: 1.0 });
        e[i] = -1.0;
        out.push(HalfSpace { normal: e, bound: 0.0 });
    }
    for ((row, g), &s) in rows.iter().zip(g).zip(slack) {
        if let (Some(row), Some(g)) = (row, g) {
            out.push(HalfSpace { normal: row.iter().copied().collect(), bound: g + s });
            out.push(HalfSpace { normal: row.iter().map(|v| -v).collect(), bound: s - g });
        }
    }
    out
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Bounds on `μ_x` over the feasible set. Undefined rows (`None`) impose no
/// constraint; an empty feasible set yields `[0, 1]` with `infeasible` set.
pub fn partial_id_interval(
    rows: &[Option<DVector<f64>>],
    g: &[Option<f64>],
    slack: &[f64],
    x: usize,
) -> PartialIdResult {
    let k = rows
        .iter()
        .flatten()
        .map(|r| r.len())
        .next()
        .unwrap_or(x + 1)
        .max(x + 1);
    let cons = constraints(rows, g, slack, k);
    let feasible = |mu: &DVector<f64>| {
        cons.iter().all(|h| {
            let lhs: f64 = h.normal.iter().zip(mu.iter()).map(|(a, b)| a * b).sum();
            lhs <= h.bound + FEAS_TOL
        })
    };

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for_each_subset(cons.len(), k, &mut |idx| {
        let a = DMatrix::from_fn(k, k, |i, j| cons[idx[i]].normal[j]);
        let b = DVector::from_fn(k, |i, _| cons[idx[i]].bound);
        if a.determinant().abs() < 1e-12 {
            return;
        }
        if let Some(v) = a.lu().solve(&b) {
            if feasible(&v) {
                lo = lo.min(v[x]);
                hi = hi.max(v[x]);
            }
        }
    });

    if lo > hi {
        PartialIdResult { interval: Interval::FULL, infeasible: true }
    } else {
        PartialIdResult {
            interval: Interval { lo: lo.clamp(0.0, 1.0), hi: hi.clamp(0.0, 1.0) },
            infeasible: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::scenarios::Scenario;
    use proptest::prelude::*;

    fn row(v: &[f64]) -> Option<DVector<f64>> {
        Some(DVector::from_row_slice(v))
    }

    /// Grid search over `[0,1]²` at resolution `step`.
    fn grid_oracle(rows: &[Option<DVector<f64>>], g: &[Option<f64>], slack: &[f64], x: usize, step: f64) -> Option<(f64, f64)> {
        let n = (1.0 / step).round() as usize;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=n {
            for j in 0..=n {
                let mu = [i as f64 * step, j as f64 * step];
                let ok = rows.iter().zip(g).zip(slack).all(|((r, g), s)| match (r, g) {
                    (Some(r), Some(g)) => (r[0] * mu[0] + r[1] * mu[1] - g).abs() <= s + 1e-12,
                    _ => true,
                });
                if ok {
                    lo = lo.min(mu[x]);
                    hi = hi.max(mu[x]);
                }
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    #[test]
    fn overidentified_rows_pin_the_point() {
        let rows = [row(&[1.0, 0.0]), row(&[0.0, 1.0]), row(&[0.5, 0.5])];
        let g = [Some(0.9), Some(0.3), Some(0.6)];
        let res = partial_id_interval(&rows, &g, &[0.0; 3], 0);
        assert!(!res.infeasible);
        assert_abs_diff_eq!(res.interval.lo, 0.9, epsilon = 1e-9);
        assert_abs_diff_eq!(res.interval.hi, 0.9, epsilon = 1e-9);
    }

    #[test]
    fn single_row_leaves_a_segment() {
        // μ₁ + μ₂ = 1.2 inside the unit box
        let res = partial_id_interval(&[row(&[0.5, 0.5])], &[Some(0.6)], &[0.0], 0);
        assert_abs_diff_eq!(res.interval.lo, 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(res.interval.hi, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn no_rows_is_vacuous() {
        let res = partial_id_interval(&[None, None], &[None, None], &[0.1, 0.1], 1);
        assert_eq!(res.interval, Interval::FULL);
        assert!(!res.infeasible);
    }

    #[test]
    fn contradictory_rows_are_flagged() {
        let rows = [row(&[1.0, 0.0]), row(&[1.0, 0.0])];
        let res = partial_id_interval(&rows, &[Some(0.1), Some(0.9)], &[0.05, 0.05], 0);
        assert!(res.infeasible);
        assert_eq!(res.interval, Interval::FULL);
    }

    #[test]
    fn three_treatments() {
        let rows = [row(&[1.0, 0.0, 0.0]), row(&[0.0, 1.0, 0.0]), row(&[0.0, 0.0, 1.0])];
        let g = [Some(0.2), Some(0.5), Some(0.7)];
        let res = partial_id_interval(&rows, &g, &[0.05; 3], 2);
        assert_abs_diff_eq!(res.interval.lo, 0.65, epsilon = 1e-9);
        assert_abs_diff_eq!(res.interval.hi, 0.75, epsilon = 1e-9);
    }

    #[test]
    fn catalog_rectangular_designs_match_grid_search() {
        for scenario in [Scenario::RectOveridentified, Scenario::WeakIvRescued] {
            let env = scenario.build();
            let p = env.compliance_matrix(0);
            let g_true = env.itt_means(0);
            let rows: Vec<_> = (0..p.nrows()).map(|z| Some(p.row(z).transpose())).collect();
            let g: Vec<_> = g_true.iter().map(|&v| Some(v)).collect();
            for s in [0.02, 0.1] {
                let slack = vec![s; rows.len()];
                for x in 0..2 {
                    let lp = partial_id_interval(&rows, &g, &slack, x);
                    let (lo, hi) = grid_oracle(&rows, &g, &slack, x, 1e-3).expect("feasible");
                    assert_abs_diff_eq!(lp.interval.lo, lo, epsilon = 2e-3);
                    assert_abs_diff_eq!(lp.interval.hi, hi, epsilon = 2e-3);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn contains_truth_and_grid_range(
            p0 in 0.0f64..1.0, p1 in 0.0f64..1.0, p2 in 0.0f64..1.0,
            mu0 in 0.0f64..1.0, mu1 in 0.0f64..1.0,
            s in 0.0f64..0.2, x in 0usize..2,
        ) {
            let rows = [row(&[p0, 1.0 - p0]), row(&[p1, 1.0 - p1]), row(&[p2, 1.0 - p2])];
            let g: Vec<Option<f64>> = rows.iter().map(|r| {
                let r = r.as_ref().unwrap();
                Some(r[0] * mu0 + r[1] * mu1)
            }).collect();
            let slack = [s; 3];
            let lp = partial_id_interval(&rows, &g, &slack, x);
            // the true point is feasible, so the interval must contain it
            prop_assert!(!lp.infeasible);
            let truth = [mu0, mu1][x];
            prop_assert!(lp.interval.lo <= truth + 1e-9 && truth <= lp.interval.hi + 1e-9);
            if let Some((lo, hi)) = grid_oracle(&rows, &g, &slack, x, 1e-3) {
                prop_assert!(lp.interval.lo <= lo + 1e-9 && hi <= lp.interval.hi + 1e-9);
            }
        }
    }
}
