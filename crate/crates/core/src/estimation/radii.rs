//! Anytime confidence radii with a `δ/(r+1)²` split across phases.
//!
//! All logarithms are natural. The compliance-row radius unions over the
//! `2^{K_x}` sign patterns of the multinomial ℓ1 bound, over contexts and over
//! recommendation arms; the reward radius unions over contexts, arms and the
//! two tails.

use serde::Serialize;

use super::stats::{Dims, PhaseStats};
use crate::error::{contract, Result};

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(contract(format!("confidence level δ = {delta} must lie in (0, 1)")))
    }
}

fn phase_factor(r: u32) -> f64 {
    let r1 = f64::from(r) + 1.0;
    r1 * r1
}

/// ℓ1 radius for an empirical compliance row built from `n` draws.
pub fn radius_a(n: u64, dims: Dims, r: u32, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let kx = i32::try_from(dims.treatments).map_err(|_| contract("too many treatments"))?;
    let log_term = (2f64.powi(kx) * dims.contexts as f64 * dims.recommendations as f64 * phase_factor(r)
        / delta)
        .ln();
    Ok((2.0 * log_term / n.max(1) as f64).sqrt())
}

fn reward_log_term(dims: Dims, r: u32, delta: f64) -> f64 {
    (4.0 * dims.contexts as f64 * dims.recommendations as f64 * phase_factor(r) / delta).ln()
}

/// Hoeffding radius for an empirical ITT mean built from `n` draws.
pub fn radius_b(n: u64, dims: Dims, r: u32, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok((reward_log_term(dims, r, delta) / (2.0 * n.max(1) as f64)).sqrt())
}

/// Empirical-Bernstein reward radius, capped by the Hoeffding radius.
pub fn radius_b_bernstein(n: u64, variance: Option<f64>, dims: Dims, r: u32, delta: f64) -> Result<f64> {
    let hoeffding = radius_b(n, dims, r, delta)?;
    let Some(v) = variance.filter(|_| n >= 2) else {
        return Ok(hoeffding);
    };
    let log_term = reward_log_term(dims, r, delta);
    let n = n as f64;
    let bernstein = (2.0 * v * log_term / n).sqrt() + 7.0 * log_term / (3.0 * (n - 1.0));
    Ok(bernstein.min(hoeffding))
}

/// Context-frequency radius after `t` rounds.
pub fn radius_d(t: u64, contexts: usize, r: u32, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let log_term = (4.0 * contexts as f64 * phase_factor(r) / delta).ln();
    Ok((log_term / (2.0 * t.max(1) as f64)).sqrt())
}

pub fn eta(d: &[f64]) -> f64 {
    d.iter().sum()
}

/// Which reward radius family to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardRadius {
    Hoeffding,
    /// Empirical Bernstein, never wider than Hoeffding.
    Bernstein,
}

/// All radii for one set of statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Radii {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    pub a_max: Vec<f64>,
    pub b_max: Vec<f64>,
    pub eta: f64,
}

impl Radii {
    pub fn compute(stats: &PhaseStats, delta: f64, family: RewardRadius) -> Result<Radii> {
        let dims = stats.dims;
        let r = stats.r;
        let mut a = Vec::with_capacity(dims.contexts);
        let mut b = Vec::with_capacity(dims.contexts);
        let mut d = Vec::with_capacity(dims.contexts);
        for w in 0..dims.contexts {
            let mut aw = Vec::with_capacity(dims.recommendations);
            let mut bw = Vec::with_capacity(dims.recommendations);
            for z in 0..dims.recommendations {
                let n = stats.count(w, z);
                aw.push(radius_a(n, dims, r, delta)?);
                bw.push(match family {
                    RewardRadius::Hoeffding => radius_b(n, dims, r, delta)?,
                    RewardRadius::Bernstein => {
                        radius_b_bernstein(n, stats.reward_variance(w, z), dims, r, delta)?
                    }
                });
            }
            a.push(aw);
            b.push(bw);
            d.push(radius_d(stats.t, dims.contexts, r, delta)?);
        }
        let max = |v: &Vec<f64>| v.iter().copied().fold(0.0, f64::max);
        Ok(Radii {
            a_max: a.iter().map(max).collect(),
            b_max: b.iter().map(max).collect(),
            eta: eta(&d),
            a,
            b,
            d,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const SQ: Dims = Dims { contexts: 1, recommendations: 2, treatments: 2 };

    #[test]
    fn frozen_radius_values() {
        // sqrt(2 ln 2560 / 4), sqrt(ln 2560 / 8), sqrt(ln 1280 / 16)
        assert_abs_diff_eq!(radius_a(4, SQ, 3, 0.05).unwrap(), 1.9808789131940407, epsilon = 1e-12);
        assert_abs_diff_eq!(radius_b(4, SQ, 3, 0.05).unwrap(), 0.9904394565970204, epsilon = 1e-12);
        assert_abs_diff_eq!(radius_d(8, 1, 3, 0.05).unwrap(), 0.6687028187521747, epsilon = 1e-12);
    }

    #[test]
    fn zero_count_guard_and_sqrt_scaling() {
        assert_eq!(radius_a(0, SQ, 5, 0.1).unwrap(), radius_a(1, SQ, 5, 0.1).unwrap());
        assert_eq!(radius_b(0, SQ, 5, 0.1).unwrap(), radius_b(1, SQ, 5, 0.1).unwrap());
        let ratio = radius_a(400, SQ, 5, 0.1).unwrap() / radius_a(100, SQ, 5, 0.1).unwrap();
        assert_abs_diff_eq!(ratio, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn eta_of_single_context_is_d() {
        let d = radius_d(8, 1, 3, 0.05).unwrap();
        assert_eq!(eta(&[d]), d);
    }

    #[test]
    fn delta_out_of_range_is_contract_error() {
        assert!(radius_a(4, SQ, 0, 0.0).is_err());
        assert!(radius_b(4, SQ, 0, 1.0).is_err());
        assert!(radius_d(4, 1, 0, -0.5).is_err());
    }

    #[test]
    fn bernstein_never_exceeds_hoeffding_and_helps_low_variance() {
        let h = radius_b(2000, SQ, 11, 0.05).unwrap();
        let eb = radius_b_bernstein(2000, Some(0.01), SQ, 11, 0.05).unwrap();
        assert!(eb < h);
        assert_eq!(radius_b_bernstein(1, Some(0.0), SQ, 11, 0.05).unwrap(), radius_b(1, SQ, 11, 0.05).unwrap());
        assert_eq!(radius_b_bernstein(5, Some(0.25), SQ, 11, 0.05).unwrap(), radius_b(5, SQ, 11, 0.05).unwrap());
    }

    proptest! {
        #[test]
        fn radii_nonincreasing_in_count(n in 0u64..100_000, r in 0u32..20, delta in 0.001f64..0.5) {
            prop_assert!(radius_a(n + 1, SQ, r, delta).unwrap() <= radius_a(n, SQ, r, delta).unwrap());
            prop_assert!(radius_b(n + 1, SQ, r, delta).unwrap() <= radius_b(n, SQ, r, delta).unwrap());
            prop_assert!(radius_d(n + 1, 3, r, delta).unwrap() <= radius_d(n, 3, r, delta).unwrap());
            prop_assert!(radius_a(n, SQ, r, delta).unwrap() >= 0.0);
        }
    }
}
