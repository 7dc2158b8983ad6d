//! Uncertified two-stage least squares always outputs a treatment policy,
//! and with a weak instrument it is often the wrong one.

use brace::algorithms::Algorithm;
use brace::harness::{run_cell, CellOutcome};
use brace::Scenario;

fn main() -> brace::Result<()> {
    let s = Scenario::WeakIvSmallGap;
    for alg in [Algorithm::TslsEpsilonDecay, Algorithm::TslsFixed, Algorithm::TslsAdaptive, Algorithm::BraceTrt] {
        let (mut wrong, mut abstained) = (0, 0);
        for seed in 0..20 {
            if let CellOutcome::Completed { row, .. } = run_cell(s, alg, seed, s.default_horizon() as u64, 0.05)? {
                wrong += u32::from(row.wrong_nonabstain);
                abstained += u32::from(row.abstained);
            }
        }
        println!("{:<20} wrong {wrong:>2}/20  abstained {abstained:>2}/20", alg.as_str());
    }
    Ok(())
}
