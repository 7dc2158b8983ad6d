//! Replay runs against the truth: every confidence radius should hold on all
//! but roughly a delta fraction of runs, and certified contexts should never
//! miss their structural means.

use brace::algorithms::{run_brace, Objective};
use brace::estimation::RewardRadius;
use brace::harness::audit::audit_trace;
use brace::harness::{cell_rng, RUN_STREAM};
use brace::Scenario;

fn main() -> brace::Result<()> {
    let delta = 0.05;
    for s in [Scenario::StrongIvEasy, Scenario::WeakIvAbstain, Scenario::RareContext] {
        let env = s.build();
        let (mut bad_runs, mut checks, mut misses) = (0, 0, 0);
        for seed in 0..50 {
            let mut rng = cell_rng(env.name(), RUN_STREAM, seed);
            let trace = run_brace(Objective::Inf, &env, 2048, delta, &mut rng)?;
            let a = audit_trace(&env, &trace, RewardRadius::Hoeffding)?;
            bad_runs += u32::from(!a.event_held());
            checks += a.certified_checks;
            misses += a.certified_violations;
        }
        println!(
            "{:<18} runs with a radius violation {bad_runs}/50  certified misses {misses}/{checks}",
            s.as_str()
        );
    }
    Ok(())
}
