//! Finite-context noncompliance bandits: exact oracles, certified IV
//! intervals, the BRACE algorithm family, baselines and a batch harness.

pub mod algorithms;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod scenarios;
pub mod estimation;
pub mod baselines;
pub mod orthoscore;

pub use error::{BraceError, Result};
pub use model::{ActionSpace, Environment, Policy};
pub use scenarios::{build_scenario, Scenario};
