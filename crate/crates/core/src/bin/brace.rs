use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use brace::harness::acceptance::{grid_criteria, run_all, sub_design_width, CriterionResult};
use brace::harness::plot::emit_plots;
use brace::harness::report::{aggregate, aggregate_csv, oracle_report, summary_table};
use brace::harness::runner::{cell_seed, long_rows, METRICS_FILE};
use brace::harness::{read_long_csv, run_suite, write_outputs, SuiteConfig};
use brace::{orthoscore, BraceError, Scenario};

#[derive(Parser)]
#[command(name = "brace", version, about = "Noncompliance-bandit simulation and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario x algorithm x seed grid and write metrics.csv and traces.jsonl.
    Run {
        /// JSON file with any of: scenarios, algorithms, seeds, horizon, delta, out.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario name or "all"; repeatable.
        #[arg(long)]
        scenario: Vec<String>,
        /// Algorithm name or "all"; repeatable.
        #[arg(long)]
        algo: Vec<String>,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the scenario catalog.
    ListScenarios,
    /// Exact population quantities and target checks for one scenario.
    Oracle {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Per (scenario, algorithm, metric) means from a run directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Grouped-bar SVG figures from a run directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the orthogonal-score bias identity on every homogeneous square scenario.
    OrthoscoreVerify {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        draws: usize,
    },
    /// Run every acceptance criterion on the default grid.
    Acceptance {
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
}

fn print_criteria(results: &[CriterionResult]) -> bool {
    for r in results {
        println!("{}", r.line());
    }
    results.iter().all(|r| r.passed != Some(false))
}

/// Exit status: 0 pass, 1 failed check, 2 usage error.
fn run(command: Command) -> brace::Result<u8> {
    match command {
        Command::Run { config, scenario, algo, seeds, horizon, delta, out } => {
            let mut cfg = match config {
                Some(path) => serde_json::from_str::<SuiteConfig>(&fs::read_to_string(path)?)?,
                None => SuiteConfig::default(),
            };
            if !scenario.is_empty() {
                cfg.scenarios = scenario;
            }
            if !algo.is_empty() {
                cfg.algorithms = algo;
            }
            cfg.seeds = seeds.unwrap_or(cfg.seeds);
            cfg.horizon = horizon.or(cfg.horizon);
            cfg.delta = delta.unwrap_or(cfg.delta);
            if let Some(out) = out {
                cfg.out = Some(out.to_string_lossy().into_owned());
            }
            let Some(out_dir) = cfg.out.clone().map(PathBuf::from) else {
                eprintln!("error: an output directory is required (--out or \"out\" in the config)");
                return Ok(2);
            };

            let results = run_suite(&cfg)?;
            write_outputs(&results, &out_dir)?;
            print!("{}", summary_table(&long_rows(&results.rows)));
            for (key, reason) in &results.skipped {
                eprintln!("skipped {}/{}/{}: {reason}", key.scenario, key.algorithm, key.seed);
            }
            for (key, reason) in &results.failures {
                eprintln!("failed {}/{}/{}: {reason}", key.scenario, key.algorithm, key.seed);
            }
            let wants_sub = cfg.resolve_scenarios()?.contains(&Scenario::WeakIvRescued);
            let sub = if wants_sub && cfg.horizon.is_none() { Some(sub_design_width(cfg.seeds, cfg.delta)?) } else { None };
            let criteria = grid_criteria(&results, cfg.seeds as usize, sub)?;
            fs::write(out_dir.join("acceptance.json"), serde_json::to_string_pretty(&criteria)?)?;
            let ok = print_criteria(&criteria);
            Ok(status(ok && results.failures.is_empty()))
        }
        Command::ListScenarios => {
            for s in Scenario::ALL {
                let spec = s.spec();
                let targets: Vec<String> = spec.targets.iter().map(ToString::to_string).collect();
                println!(
                    "{:<24} S={} K_z={} K_x={} horizon={:<5} {}",
                    s.as_str(),
                    s.build().num_contexts(),
                    spec.flags.num_recommendations,
                    spec.flags.num_treatments,
                    spec.default_horizon,
                    targets.join(" ")
                );
            }
            Ok(0)
        }
        Command::Oracle { scenario, format } => {
            let report = oracle_report(scenario.parse()?)?;
            match format {
                Format::Text | Format::Csv => print!("{}", report.to_text()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            Ok(status(report.verification.passed()))
        }
        Command::Report { input, format } => {
            let agg = aggregate(&read_long_csv(&input.join(METRICS_FILE))?);
            match format {
                Format::Csv => print!("{}", aggregate_csv(&agg)?),
                Format::Json => println!("{}", serde_json::to_string_pretty(&agg)?),
                Format::Text => print!("{}", summary_table(&read_long_csv(&input.join(METRICS_FILE))?)),
            }
            Ok(0)
        }
        Command::Plot { input, out } => {
            let (written, skipped) = emit_plots(&read_long_csv(&input.join(METRICS_FILE))?, &out)?;
            for p in &written {
                println!("wrote {}", p.display());
            }
            for s in &skipped {
                eprintln!("warning: no data for {s}, skipped");
            }
            Ok(0)
        }
        Command::OrthoscoreVerify { out, draws } => {
            let envs: Vec<_> = Scenario::ALL
                .iter()
                .map(|s| s.build())
                .filter(|e| e.is_square() && e.is_homogeneous())
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed("orthoscore", "verify", 0));
            let report = orthoscore::verify(&envs, draws, &mut rng)?;
            fs::create_dir_all(&out)?;
            let mut w = csv::Writer::from_path(out.join("orthoscore.csv"))?;
            println!("{:<24}{:>8}{:>14}{:>24}{:>24}{:>12}", "scenario", "context", "perturbation", "lhs", "rhs", "|diff|");
            for r in &report.rows {
                println!("{:<24}{:>8}{:>14}{:>24.16e}{:>24.16e}{:>12.2e}", r.scenario, r.context, r.perturbation, r.lhs, r.rhs, r.diff);
                w.serialize(r)?;
            }
            w.flush()?;
            for (name, w_, ratio) in &report.scaling_ratios {
                println!("scaling {name} context {w_}: bias(eps)/bias(eps/2) = {ratio:.12}");
            }
            for (name, amp, inv) in &report.amplification {
                println!("amplification {name}: |rhs|/(|dP||dmu|) = {amp:.4} (inverse norm {inv:.4})");
            }
            println!(
                "max identity gap {:.3e}; max single-nuisance bias {:.3e}",
                report.max_identity_diff, report.max_double_robust_bias
            );
            Ok(status(report.passed(1e-10, 1e-12, 1e-9)))
        }
        Command::Acceptance { delta } => Ok(status(print_criteria(&run_all(delta)?))),
    }
}

fn status(passed: bool) -> u8 {
    u8::from(!passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e @ (BraceError::UnknownScenario { .. } | BraceError::UnknownAlgorithm { .. } | BraceError::Json(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
