//! BRACE-TRT stops when the instrument is strong and abstains when it is weak.

use brace::algorithms::run_brace;
use brace::algorithms::Objective;
use brace::harness::{cell_rng, RUN_STREAM};
use brace::model::diagnostics;
use brace::Scenario;

fn main() -> brace::Result<()> {
    for s in [Scenario::StrongIvEasy, Scenario::WeakIvAbstain, Scenario::WeakIvSmallGap] {
        let env = s.build();
        let d = diagnostics(&env)?;
        let mut stops = 0;
        let mut abstains = 0;
        for seed in 0..10 {
            let mut rng = cell_rng(env.name(), RUN_STREAM, seed);
            let trace = run_brace(Objective::Trt, &env, s.default_horizon() as u64, 0.05, &mut rng)?;
            match &trace.outcome.trt_policy {
                Some(p) => {
                    stops += 1;
                    assert!(env.policy_value(p)? >= d.str_opt_value - 1e-12);
                }
                None => abstains += 1,
            }
        }
        println!(
            "{:<20} ||P^-1|| {:>8.2}  stopped {stops:>2}  abstained {abstains:>2}",
            s.as_str(),
            d.inv_norm_max.unwrap_or(f64::INFINITY)
        );
    }
    Ok(())
}
