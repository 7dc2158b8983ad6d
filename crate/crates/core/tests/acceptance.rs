//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed.

use std::process::ExitCode;

use brace::harness::acceptance::run_all;

fn main() -> ExitCode {
    let results = match run_all(0.05) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance run failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<u8> = results.iter().filter(|r| r.passed != Some(true)).map(|r| r.id).collect();
    if results.len() != 14 || !failed.is_empty() {
        eprintln!("failed criteria: {failed:?} ({} reported)", results.len());
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
