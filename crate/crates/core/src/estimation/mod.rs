//! Sufficient statistics, confidence radii, certification and local/policy
//! interval construction.

pub mod intervals;
pub mod partial_id;
pub mod radii;
pub mod stats;

pub use intervals::{
    certify, plugin_mu, plugin_solve, policy_bounds, Certification, ContextWeights, Interval,
    LocalIntervals, PolicyBounds, StructuralMode,
};
pub use partial_id::{partial_id_interval, PartialIdResult};
pub use radii::{eta, radius_a, radius_b, radius_b_bernstein, radius_d, Radii, RewardRadius};
pub use stats::{Dims, PhaseStats, StatsAccumulator};
