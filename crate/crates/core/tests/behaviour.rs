use brace::algorithms::{run_brace, run_brace_fast, run_recert, Algorithm, Objective, StructuralVerdict};
use brace::harness::{cell_rng, run_cell, CellOutcome, MetricsRow, RUN_STREAM};
use brace::model::diagnostics;
use brace::Scenario;

const DELTA: f64 = 0.05;

fn row(s: Scenario, alg: Algorithm, seed: u64) -> MetricsRow {
    match run_cell(s, alg, seed, s.default_horizon() as u64, DELTA).unwrap() {
        CellOutcome::Completed { row, .. } => row,
        CellOutcome::Skipped { reason } => panic!("{alg} skipped on {s}: {reason}"),
    }
}

#[test]
fn fast_commits_before_base_on_paired_seeds() {
    let s = Scenario::StrongIvEasy;
    let earlier = (0..10)
        .filter(|&seed| {
            let base = row(s, Algorithm::BraceRec, seed).commit_time.expect("base commits");
            let fast = row(s, Algorithm::BraceRecFast, seed).commit_time.expect("fast commits");
            fast < base
        })
        .count();
    assert!(earlier >= 8, "fast earlier in {earlier}/10");
}

#[test]
fn fast_never_later_than_base_on_a_shared_stream() {
    // until the first commit both variants consume the stream identically and
    // the fast radii are never wider at a shared check round
    let env = Scenario::StrongIvEasy.build();
    for seed in 0..10 {
        let base = run_brace(Objective::Rec, &env, 2048, DELTA, &mut cell_rng(env.name(), RUN_STREAM, seed)).unwrap();
        let fast = run_brace_fast(Objective::Rec, &env, 2048, DELTA, &mut cell_rng(env.name(), RUN_STREAM, seed)).unwrap();
        assert!(fast.outcome.commit_time.unwrap() <= base.outcome.commit_time.unwrap());
        assert_eq!(fast.outcome.rec_policy, base.outcome.rec_policy);
    }
}

#[test]
fn fast_trt_still_abstains_on_small_gap() {
    for seed in 0..10 {
        assert!(row(Scenario::WeakIvSmallGap, Algorithm::BraceTrtFast, seed).abstained);
    }
}

#[test]
fn rec_commits_are_the_operational_optimum() {
    for s in [Scenario::StrongIvEasy, Scenario::PrivateSignal, Scenario::WorkflowRedesign, Scenario::Tradeoff] {
        let opt = diagnostics(&s.build()).unwrap().rec_opt_value;
        for seed in 0..5 {
            for alg in [Algorithm::BraceRec, Algorithm::BraceRecFast] {
                let r = row(s, alg, seed);
                assert!(!r.wrong_nonabstain, "{alg} on {s} seed {seed}");
                if let Some(v) = r.rec_value {
                    assert!((v - opt).abs() < 1e-12);
                }
            }
        }
    }
}

fn recert(s: Scenario, seed: u64) -> brace::algorithms::RunTrace {
    let env = s.build();
    run_recert(&env, s.default_horizon() as u64, DELTA, &mut cell_rng(env.name(), RUN_STREAM, seed)).unwrap()
}

#[test]
fn recert_private_signal_deploys_rec_and_withholds_structure() {
    let env = Scenario::PrivateSignal.build();
    for seed in 0..5 {
        let out = recert(Scenario::PrivateSignal, seed).outcome;
        let rec = env.policy_value(out.rec_policy.as_ref().unwrap()).unwrap();
        assert!((rec - 1.0).abs() < 1e-12);
        assert_eq!(out.structural_verdict, Some(StructuralVerdict::Abstain));
        let est = env.policy_value(out.structural_candidate.as_ref().unwrap()).unwrap();
        assert!((est - 0.5).abs() < 1e-12);
    }
}

#[test]
fn recert_workflow_redesign_estimates_but_abstains() {
    let env = Scenario::WorkflowRedesign.build();
    for seed in 0..5 {
        let out = recert(Scenario::WorkflowRedesign, seed).outcome;
        let rec = env.policy_value(out.rec_policy.as_ref().unwrap()).unwrap();
        assert!((rec - 0.69).abs() < 1e-9);
        let est = env.policy_value(out.structural_candidate.as_ref().unwrap()).unwrap();
        assert!((est - 0.90).abs() < 1e-9);
        assert_eq!(out.structural_verdict, Some(StructuralVerdict::Abstain));
        assert!(out.final_structural_bounds.is_some());
    }
}

#[test]
fn recert_bounds_freeze_after_commit() {
    let trace = recert(Scenario::StrongIvEasy, 0);
    let commit = trace.outcome.commit_time.expect("commits");
    let last = trace.phases.iter().filter(|p| p.t <= commit).filter_map(|p| p.structural_bounds.clone()).last();
    assert_eq!(trace.outcome.final_structural_bounds, last);
    assert!(trace.phases.iter().filter(|p| p.t > commit).all(|p| p.structural_bounds.is_none()));
}

#[test]
fn certification_is_mostly_monotone() {
    let env = Scenario::StrongIvEasy.build();
    let (mut kept, mut total) = (0, 0);
    for seed in 0..20 {
        let trace = run_brace(Objective::Inf, &env, 2048, DELTA, &mut cell_rng(env.name(), RUN_STREAM, seed)).unwrap();
        for pair in trace.phases.windows(2) {
            for w in 0..env.num_contexts() {
                if pair[0].certified[w] {
                    total += 1;
                    kept += usize::from(pair[1].certified[w]);
                }
            }
        }
    }
    assert!(total > 0);
    assert!(kept as f64 >= 0.95 * total as f64, "{kept}/{total}");
}

#[test]
fn base_checks_only_at_powers_of_two() {
    let env = Scenario::Tradeoff.build();
    let trace = run_brace(Objective::Inf, &env, 1000, DELTA, &mut cell_rng(env.name(), RUN_STREAM, 3)).unwrap();
    assert!(trace.phases.iter().all(|p| p.t.is_power_of_two() && p.t == 1 << p.r));
    assert_eq!(trace.phases.len(), 10);
}

#[test]
fn jsonl_has_phase_lines_then_one_summary() {
    let s = Scenario::StrongIvEasy;
    let CellOutcome::Completed { trace, .. } = run_cell(s, Algorithm::BraceRec, 4, 2048, DELTA).unwrap() else {
        panic!("skipped")
    };
    let text = trace.to_jsonl(4).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let (summary, phases) = lines.split_last().unwrap();
    assert_eq!(phases.len(), trace.phases.len());
    for p in phases {
        assert_eq!(p["kind"], "phase");
        assert_eq!(p["seed"], 4);
        for key in ["scenario", "algorithm", "r", "t", "certified", "bounds", "structural_bounds", "events"] {
            assert!(p.get(key).is_some(), "phase line lacks {key}");
        }
        assert_eq!(p["bounds"]["space"], "rec");
    }
    assert_eq!(summary["kind"], "summary");
    for key in ["horizon", "delta", "rec_policy", "trt_policy", "commit_time", "rounds_played", "final_certified"] {
        assert!(summary.get(key).is_some(), "summary lacks {key}");
    }
    let commit = phases.iter().flat_map(|p| p["events"].as_array().unwrap()).find(|e| e["kind"] == "commit");
    assert_eq!(commit.unwrap()["policy"], summary["rec_policy"]);
}

#[test]
fn every_algorithm_runs_or_is_skipped_with_a_reason() {
    for s in [Scenario::DirectControl, Scenario::RectOveridentified] {
        for alg in Algorithm::ALL {
            match run_cell(s, alg, 0, 256, DELTA).unwrap() {
                CellOutcome::Completed { row, .. } => assert_eq!(row.algorithm, alg.as_str()),
                CellOutcome::Skipped { reason } => assert!(!reason.is_empty()),
            }
        }
    }
}
