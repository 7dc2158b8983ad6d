//! BRACE-RECERT: a recommendation policy that is always deployed, plus a
//! structural certificate that is issued only when it can be backed.

use brace::algorithms::{run_recert, StructuralVerdict};
use brace::harness::{cell_rng, RUN_STREAM};
use brace::model::diagnostics;
use brace::Scenario;

fn main() -> brace::Result<()> {
    for s in [Scenario::StrongIvEasy, Scenario::PrivateSignal, Scenario::WorkflowRedesign] {
        let env = s.build();
        let d = diagnostics(&env)?;
        let mut rng = cell_rng(env.name(), RUN_STREAM, 0);
        let trace = run_recert(&env, s.default_horizon() as u64, 0.05, &mut rng)?;
        let out = &trace.outcome;
        let rec = out.rec_policy.as_ref().map(|p| env.policy_value(p)).transpose()?;
        let verdict = match &out.structural_verdict {
            Some(StructuralVerdict::Deploy { policy }) => format!("deploy {:?}", policy.assignment),
            _ => "abstain".to_string(),
        };
        let candidate = out.structural_candidate.as_ref().map(|p| env.policy_value(p)).transpose()?;
        println!(
            "{:<20} rec value {:>6} (opt {:.2})  structural {verdict}  plug-in favourite worth {:?}",
            s.as_str(),
            rec.map_or("-".into(), |v| format!("{v:.2}")),
            d.rec_opt_value,
            candidate
        );
    }
    Ok(())
}
