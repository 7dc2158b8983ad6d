//! Partial identification when the compliance matrix is weak or rectangular.
//!
//! First the raw interval solver on a hand-made system, then BRACE-INF with
//! and without partial identification on the rescued weak-instrument design.

use brace::algorithms::{run_brace, run_brace_partial, Objective};
use brace::estimation::partial_id_interval;
use brace::harness::{cell_rng, RUN_STREAM};
use brace::model::{diagnostics, enumerate_policies};
use brace::{ActionSpace, Scenario};
use nalgebra::DVector;

fn main() -> brace::Result<()> {
    // one informative row: 0.5 mu_0 + 0.5 mu_1 = 0.4, with slack 0.05
    let rows = vec![Some(DVector::from_vec(vec![0.5, 0.5])), None];
    let g = vec![Some(0.4), None];
    for x in 0..2 {
        let r = partial_id_interval(&rows, &g, &[0.05, 0.0], x);
        println!("mu_{x} in [{:.3}, {:.3}]", r.interval.lo, r.interval.hi);
    }

    let scenario = Scenario::WeakIvRescued;
    let env = scenario.build();
    let opt = diagnostics(&env)?.str_opt;
    let policies = enumerate_policies(env.num_contexts(), env.num_treatments(), ActionSpace::Trt)?;
    let idx = policies.iter().position(|p| *p == opt).expect("enumerated");
    let horizon = scenario.default_horizon() as u64;

    let mut rng = cell_rng(env.name(), RUN_STREAM, 0);
    let point = run_brace(Objective::Inf, &env, horizon, 0.05, &mut rng)?;
    let mut rng = cell_rng(env.name(), RUN_STREAM, 0);
    let partial = run_brace_partial(Objective::Inf, &env, horizon, 0.05, &mut rng)?;
    for (name, trace) in [("point", &point), ("partial", &partial)] {
        let w = trace.outcome.final_structural_bounds.as_ref().map(|b| b.width(idx));
        println!("{name:<8} width at the optimal policy: {w:.4?}");
    }
    Ok(())
}
