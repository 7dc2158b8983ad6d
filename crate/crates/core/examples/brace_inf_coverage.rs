//! BRACE-INF: simultaneous structural bounds for every treatment policy,
//! compared with the true values at each phase.

use brace::algorithms::{run_brace, Objective};
use brace::harness::{cell_rng, RUN_STREAM};
use brace::model::enumerate_policies;
use brace::{ActionSpace, Scenario};

fn main() -> brace::Result<()> {
    let scenario = Scenario::StrongIvEasy;
    let env = scenario.build();
    let policies = enumerate_policies(env.num_contexts(), env.num_treatments(), ActionSpace::Trt)?;
    let truth: Vec<f64> = policies.iter().map(|p| env.policy_value(p)).collect::<brace::Result<_>>()?;

    let mut rng = cell_rng(env.name(), RUN_STREAM, 0);
    let trace = run_brace(Objective::Inf, &env, scenario.default_horizon() as u64, 0.05, &mut rng)?;
    for ph in &trace.phases {
        let covered = truth.iter().enumerate().filter(|&(i, &v)| ph.bounds.covers(i, v)).count();
        let mean_width = (0..ph.bounds.len()).map(|i| ph.bounds.width(i)).sum::<f64>() / ph.bounds.len() as f64;
        println!("t={:<5} covered {covered}/{}  mean width {mean_width:.3}", ph.t, truth.len());
    }
    if let Some(b) = &trace.outcome.final_structural_bounds {
        for (i, p) in policies.iter().enumerate() {
            println!("{:?}: true {:.3} in [{:.3}, {:.3}]", p.assignment, truth[i], b.lcb[i], b.ucb[i]);
        }
    }
    Ok(())
}
