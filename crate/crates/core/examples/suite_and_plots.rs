//! Run a small grid in parallel, write the CSV/JSONL outputs and the SVG
//! figures into a temporary directory.

use brace::harness::plot::emit_plots;
use brace::harness::report::summary_table;
use brace::harness::runner::{long_rows, METRICS_FILE};
use brace::harness::{read_long_csv, run_suite, write_outputs, SuiteConfig};

fn main() -> brace::Result<()> {
    let config = SuiteConfig {
        scenarios: vec!["direct_control".into(), "strong_iv_easy".into(), "actual_treatment_trap".into()],
        algorithms: vec!["brace_rec".into(), "brace_trt".into(), "chosen_ucb".into(), "actual_ucb".into()],
        seeds: 5,
        horizon: None,
        delta: 0.05,
        out: None,
    };
    let results = run_suite(&config)?;
    print!("{}", summary_table(&long_rows(&results.rows)));

    let dir = std::env::temp_dir().join("brace_suite_example");
    write_outputs(&results, &dir)?;
    let rows = read_long_csv(&dir.join(METRICS_FILE))?;
    let (written, skipped) = emit_plots(&rows, &dir.join("figures"))?;
    println!("{} figures written under {}, {} without data", written.len(), dir.display(), skipped.len());
    Ok(())
}
