//! Conventional bandits on a noncompliance trap: learning from the realized
//! treatment or from compliant rounds only leads to the wrong policy.

use brace::algorithms::Algorithm;
use brace::harness::{run_cell, CellOutcome};
use brace::Scenario;

fn main() -> brace::Result<()> {
    let algorithms = [
        Algorithm::ChosenUcb,
        Algorithm::ComplyUcb,
        Algorithm::ActualUcb,
        Algorithm::Thompson,
        Algorithm::BraceRec,
    ];
    for s in [Scenario::ActualTreatmentTrap, Scenario::PrivateSignal] {
        println!("{}", s.as_str());
        for alg in algorithms {
            let (mut regret, mut wrong, mut abstained) = (0.0, 0, 0);
            for seed in 0..10 {
                if let CellOutcome::Completed { row, .. } = run_cell(s, alg, seed, s.default_horizon() as u64, 0.05)? {
                    regret += row.operational_regret / 10.0;
                    wrong += u32::from(row.wrong_nonabstain);
                    abstained += u32::from(row.abstained);
                }
            }
            println!("  {:<14} regret {regret:>8.2}  wrong {wrong:>2}/10  abstained {abstained:>2}/10", alg.as_str());
        }
    }
    Ok(())
}
