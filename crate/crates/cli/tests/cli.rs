//! End-to-end tests of the planner and report pipeline at the library level.

use laxform_cli::report::Report;
use laxform_cli::runner::{execute, resolve_config, RunConfig};
use laxform_cli::spec::parse_spec;

fn run_text(text: &str, seed: u64) -> Result<Report, String> {
    let doc = parse_spec(text).map_err(|e| e.to_string())?;
    let cfg = RunConfig { seed, trials: 2, dim: 2 };
    execute(&doc, &cfg, text).map_err(|e| e.to_string())
}

#[test]
fn every_requested_check_appears_in_the_report() {
    let text = "\
coords xi eta nu
params a b
poles U = [a]
poles V = [b]
construct zm
check el
check isospectral
check mdc
";
    let report = run_text(text, 3).unwrap();
    assert!(report.all_passed());
    for family in ["vder.", "compat.", "isospectral.", "mdc."] {
        assert!(
            report.records.iter().any(|r| r.name.starts_with(family)),
            "no record for requested family {}",
            family
        );
    }
    // no duplicates
    let mut names: Vec<&str> = report.records.iter().map(|r| r.name.as_str()).collect();
    let before = names.len();
    names.sort();
    names.dedup();
    assert_eq!(before, names.len(), "duplicate record names");
}

#[test]
fn identical_seed_gives_identical_jsonl() {
    let text = "\
coords xi eta nu
params a b c
poles U = [a]
poles V = [b]
poles W = [c]
construct triplet
check closure
";
    let r1 = run_text(text, 11).unwrap();
    let r2 = run_text(text, 11).unwrap();
    assert_eq!(r1.to_jsonl(), r2.to_jsonl());
    let r3 = run_text(text, 12).unwrap();
    assert_ne!(r1.to_jsonl(), r3.to_jsonl(), "seed must enter the records");
}

#[test]
fn minimal_spec_declares_poles_by_use() {
    // the poles statements alone declare the spectral symbols
    let text = "\
coords xi eta nu
poles U = [a]
poles V = [b]
poles W = [c]
construct triplet
check closure
";
    let report = run_text(text, 29).unwrap();
    assert!(report.all_passed());
    assert!(report.records.iter().any(|r| r.name == "closure.triplet.111"));
}

#[test]
fn pole_symbol_colliding_with_a_coordinate_is_an_input_error() {
    let text = "\
coords xi eta nu
poles U = [xi]
poles V = [b]
construct zm
check el
";
    let err = run_text(text, 1).unwrap_err();
    assert!(err.contains("collides"), "{}", err);
}

#[test]
fn pole_symbol_in_two_families_is_an_input_error() {
    let text = "\
coords xi eta nu
poles U = [a]
poles V = [a]
construct zm
check el
";
    let err = run_text(text, 1).unwrap_err();
    assert!(err.contains("two families"), "{}", err);
}

#[test]
fn check_without_construction_is_an_input_error() {
    let text = "coords xi eta nu\ncheck closure\n";
    let err = run_text(text, 1).unwrap_err();
    assert!(err.contains("no construction"), "{}", err);
}

#[test]
fn inapplicable_check_is_an_input_error() {
    let text = "\
coords xi eta nu
params a b
poles U = [a]
poles V = [b]
construct zm
check ghost
";
    let err = run_text(text, 1).unwrap_err();
    assert!(err.contains("does not apply"), "{}", err);
}

#[test]
fn empty_document_runs_to_an_empty_report() {
    let report = run_text("", 1).unwrap();
    assert!(report.records.is_empty());
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn all_expands_per_construction() {
    let text = "\
coords x1 x2 x3
construct akns tower 3
check all
";
    let report = run_text(text, 5).unwrap();
    assert!(report.all_passed());
    for family in ["qtower.", "hierarchy.", "scalar.", "mdc."] {
        assert!(
            report.records.iter().any(|r| r.name.starts_with(family)),
            "missing family {}",
            family
        );
    }
}

#[test]
fn config_resolution_precedence() {
    let doc = parse_spec("option seed = 9\noption trials = 2\n").unwrap();
    // CLI beats document option beats environment
    let cfg = resolve_config(&doc, Some(1), None, None, Some(7));
    assert_eq!(cfg.seed, 1);
    assert_eq!(cfg.trials, 2);
    let cfg = resolve_config(&doc, None, None, None, Some(7));
    assert_eq!(cfg.seed, 9);
    let doc2 = parse_spec("").unwrap();
    let cfg = resolve_config(&doc2, None, None, None, Some(7));
    assert_eq!(cfg.seed, 7);
    let cfg = resolve_config(&doc2, None, None, None, None);
    assert_eq!(cfg.seed, laxform_cli::runner::DEFAULT_SEED);
}

#[test]
fn bundled_fixtures_parse_and_pass() {
    for (name, text) in laxform_cli::PAPER_SUITE {
        let report = run_text(text, 17).unwrap_or_else(|e| panic!("fixture {}: {}", name, e));
        assert!(
            report.all_passed(),
            "fixture {} has failures: {:?}",
            name,
            report.records.iter().filter(|r| !r.passed()).map(|r| &r.name).collect::<Vec<_>>()
        );
        assert!(!report.records.is_empty());
    }
}

#[test]
fn corrupted_fixture_fails_closure() {
    let report = run_text(laxform_cli::CORRUPTED_FIXTURE, 17).unwrap();
    assert_eq!(report.exit_code(), 1);
    let failing: Vec<&str> =
        report.records.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    assert!(failing.contains(&"scalar.closure"), "failing: {:?}", failing);
}
