//! Build an environment by hand, serialize it, and query the oracle.
//!
//! Two contexts, binary recommendation and treatment. Compliers follow the
//! recommendation, never-takers always take treatment 0.

use brace::model::{diagnostics, ComplianceType};
use brace::{ActionSpace, Environment, Policy};

fn main() -> brace::Result<()> {
    let types = vec![
        ComplianceType { weights: vec![0.8, 0.5], map: vec![0, 1] },
        ComplianceType { weights: vec![0.2, 0.5], map: vec![0, 0] },
    ];
    // [type][context][treatment]; same structural means for both types
    let rewards = vec![vec![vec![0.3, 0.6], vec![0.7, 0.4]]; 2];
    let env = Environment::new("hand_built", vec![0.5, 0.5], 2, 2, types, rewards)?;

    let json = env.to_json()?;
    let back = Environment::from_json(&json)?;
    assert_eq!(env, back);

    for w in 0..env.num_contexts() {
        println!("context {w}");
        println!("  P(w) =\n{}", env.compliance_matrix(w));
        println!("  g(w) = {:?}", env.itt_means(w).as_slice());
        println!("  mu(w) = {:?}", env.structural_means(w).as_slice());
    }
    let d = diagnostics(&env)?;
    println!("homogeneous {}, invertible {}", d.homogeneous, d.invertible);
    println!("best recommendation policy {:?} value {:.4}", d.rec_opt.assignment, d.rec_opt_value);
    println!("best treatment policy {:?} value {:.4}", d.str_opt.assignment, d.str_opt_value);
    let always_one = Policy::constant(ActionSpace::Trt, 1, 2);
    println!("always treat: {:.4}", env.policy_value(&always_one)?);
    Ok(())
}
