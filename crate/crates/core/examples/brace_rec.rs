//! BRACE-REC and its FAST variant on an easy instrument: phase log and commit.

use brace::algorithms::{run_brace, run_brace_fast, Objective, PhaseEvent};
use brace::harness::{cell_rng, RUN_STREAM};
use brace::model::diagnostics;
use brace::Scenario;

fn main() -> brace::Result<()> {
    let env = Scenario::StrongIvEasy.build();
    let opt = diagnostics(&env)?.rec_opt_value;
    let horizon = Scenario::StrongIvEasy.default_horizon() as u64;

    let mut rng = cell_rng(env.name(), RUN_STREAM, 0);
    let trace = run_brace(Objective::Rec, &env, horizon, 0.05, &mut rng)?;
    for ph in &trace.phases {
        let widest = (0..ph.bounds.len()).map(|i| ph.bounds.width(i)).fold(0.0, f64::max);
        let certified = ph.certified.iter().filter(|&&c| c).count();
        print!("r={:<2} t={:<5} certified {certified}/{} widest {widest:.3}", ph.r, ph.t, ph.certified.len());
        for ev in &ph.events {
            if let PhaseEvent::Commit { policy } = ev {
                print!("  commit {:?}", policy.assignment);
            }
        }
        println!();
    }
    let value = trace.outcome.rec_policy.as_ref().map(|p| env.policy_value(p)).transpose()?;
    println!("base: commit at {:?}, value {value:?} (optimum {opt:.3})", trace.outcome.commit_time);

    let mut rng = cell_rng(env.name(), RUN_STREAM, 0);
    let fast = run_brace_fast(Objective::Rec, &env, horizon, 0.05, &mut rng)?;
    println!("fast: commit at {:?}", fast.outcome.commit_time);
    Ok(())
}
