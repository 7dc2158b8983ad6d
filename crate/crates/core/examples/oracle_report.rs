//! Exact population quantities for a scenario (default: every scenario).
//!
//!     cargo run --example oracle_report -- weak_iv_abstain

use brace::harness::report::oracle_report;
use brace::Scenario;

fn main() -> brace::Result<()> {
    let scenarios: Vec<Scenario> = match std::env::args().nth(1) {
        Some(name) => vec![name.parse()?],
        None => Scenario::ALL.to_vec(),
    };
    for s in scenarios {
        let report = oracle_report(s)?;
        print!("{}", report.to_text());
        println!();
    }
    Ok(())
}
