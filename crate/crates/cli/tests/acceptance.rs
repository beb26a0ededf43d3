//! Acceptance suite: the twelve exit criteria, each timed against its
//! budget and reported with one pass/fail line.

use std::process::Command;
use std::time::{Duration, Instant};

use laxform_core::check::CheckResult;
use laxform_core::zm::{ghost_reduction, PoleData, ZmSystem};
use laxform_core::{akns, selftest, zm};

struct Criterion {
    name: &'static str,
    budget: Duration,
}

impl Criterion {
    fn new(name: &'static str, budget_s: u64) -> Self {
        Criterion { name, budget: Duration::from_secs(budget_s) }
    }

    fn assert(self, run: impl FnOnce() -> Vec<CheckResult>) {
        let start = Instant::now();
        let checks = run();
        let elapsed = start.elapsed();
        let failed: Vec<&CheckResult> = checks.iter().filter(|c| !c.ok()).collect();
        let ok = failed.is_empty() && elapsed <= self.budget;
        println!(
            "criterion {:<28} {}  ({} checks, {:.2?})",
            self.name,
            if ok { "PASS" } else { "FAIL" },
            checks.len(),
            elapsed
        );
        for f in &failed {
            println!("    failing check {}: {}", f.name, f.residual);
        }
        assert!(failed.is_empty(), "criterion {}: {} failing checks", self.name, failed.len());
        assert!(
            elapsed <= self.budget,
            "criterion {}: took {:.2?}, budget {:.2?}",
            self.name,
            elapsed,
            self.budget
        );
    }
}

#[test]
fn criterion_01_q_recursion_golden() {
    Criterion::new("1 q-recursion golden", 1).assert(|| {
        akns::verify_q_recursion(3)
            .unwrap()
            .into_iter()
            .filter(|c| c.name == "qtower.q2" || c.name == "qtower.q3")
            .collect()
    });
}

#[test]
fn criterion_02_hierarchy_pdes() {
    Criterion::new("2 hierarchy PDEs", 1).assert(|| akns::verify_hierarchy_equations().unwrap());
}

#[test]
fn criterion_03_scalar_el_match() {
    Criterion::new("3 scalar EL match", 10).assert(|| {
        let mut checks = akns::verify_scalar_el().unwrap();
        checks.extend(akns::verify_l23_flow_equivalence(7, 10).unwrap());
        checks
    });
}

#[test]
fn criterion_04_scalar_multiform_closure() {
    Criterion::new("4 scalar multiform closure", 10).assert(|| {
        akns::verify_scalar_multiform(7)
            .unwrap()
            .into_iter()
            .filter(|c| c.name == "scalar.closure" || c.name == "scalar.offshell_nonzero")
            .collect()
    });
}

#[test]
fn criterion_05_zm_variational_derivatives() {
    Criterion::new("5 variational derivatives", 10).assert(|| {
        let mut checks = Vec::new();
        for n1 in [1usize, 2] {
            for n2 in [1usize, 2] {
                for include_g in [false, true] {
                    let sys = ZmSystem::new(&PoleData::pair(n1, n2, include_g)).unwrap();
                    checks.extend(zm::verify_variational_derivatives(&sys).unwrap());
                }
            }
        }
        checks
    });
}

#[test]
fn criterion_06_triplet_closure_grid() {
    Criterion::new("6 triplet closure grid", 60).assert(|| {
        let mut checks = Vec::new();
        for n1 in [1usize, 2] {
            for n2 in [1usize, 2] {
                for n3 in [1usize, 2] {
                    let sys = ZmSystem::new(&PoleData::symmetric(n1, n2, n3)).unwrap();
                    // deepest numeric backstop on the single-pole case:
                    // ten seeds at both dimensions
                    let (trials, dims): (u32, &[usize]) =
                        if (n1, n2, n3) == (1, 1, 1) { (10, &[2, 3]) } else { (2, &[2]) };
                    checks.extend(zm::verify_closure(&sys, 7, trials, dims).unwrap());
                }
            }
        }
        checks
    });
}

#[test]
fn criterion_07_mdc() {
    Criterion::new("7 multidimensional consistency", 5).assert(|| zm::verify_mdc(7, 3, 2).unwrap());
}

#[test]
fn criterion_08_isospectrality() {
    Criterion::new("8 isospectrality", 5).assert(|| {
        let sys = ZmSystem::new(&PoleData::pair(1, 1, false)).unwrap();
        zm::verify_isospectral(&sys, 7, 5, 2).unwrap()
    });
}

#[test]
fn criterion_09_ghost_reduction() {
    Criterion::new("9 ghost reduction", 10).assert(|| {
        let mut checks = Vec::new();
        for (n1, n2) in [(1usize, 1usize), (2, 1)] {
            let sys = ZmSystem::new(&PoleData::lax_pair(n1, n2)).unwrap();
            checks.extend(ghost_reduction(&sys, 7, 2, 2).unwrap());
        }
        checks
    });
}

#[test]
fn criterion_10_el_class_partition() {
    Criterion::new("10 EL class partition", 5).assert(|| {
        let mut checks = Vec::new();
        for sizes in [(1usize, 1usize, 1usize), (2, 1, 1)] {
            let sys = ZmSystem::new(&PoleData::symmetric(sizes.0, sizes.1, sizes.2)).unwrap();
            checks.extend(zm::verify_el_classes(&sys, None).unwrap());
        }
        checks
    });
}

#[test]
fn criterion_11_property_suites() {
    Criterion::new("11 property suites", 60).assert(|| selftest::run_all(1000));
}

#[test]
fn criterion_12_cli_determinism() {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_laxform");
    let suite = |out: &str| {
        Command::new(bin)
            .args(["paper-suite", "--seed", "7", "--format", "jsonl", "--out", out])
            .status()
            .expect("binary runs")
    };
    let s1 = suite("/tmp/laxform_acceptance_1.jsonl");
    let s2 = suite("/tmp/laxform_acceptance_2.jsonl");
    assert_eq!(s1.code(), Some(0), "paper-suite must exit 0");
    assert_eq!(s2.code(), Some(0));
    let b1 = std::fs::read("/tmp/laxform_acceptance_1.jsonl").unwrap();
    let b2 = std::fs::read("/tmp/laxform_acceptance_2.jsonl").unwrap();
    assert_eq!(b1, b2, "paper-suite output must be byte-identical for a fixed seed");
    let body = String::from_utf8(b1).unwrap();
    assert!(body.lines().count() >= 20, "the bundled suite reports at least 20 records");
    assert!(
        body.lines().any(|l| l.contains("closure.triplet.111") && l.contains("\"pass\"")),
        "the single-pole triplet closure record must pass"
    );

    // the corrupted fixture must fail with a named failing check
    let fixture = format!("{}/assets/corrupted_l23.lax", env!("CARGO_MANIFEST_DIR"));
    let out = Command::new(bin)
        .args(["run", &fixture, "--seed", "7"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(1), "corrupted fixture must exit 1");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("fail"), "report must name the failing check:\n{}", text);
    assert!(text.contains("scalar.closure"), "failing check must be named:\n{}", text);
    println!("criterion {:<28} PASS  ({:.2?})", "12 CLI determinism", start.elapsed());
}

#[test]
fn env_seed_matches_explicit_seed() {
    let bin = env!("CARGO_BIN_EXE_laxform");
    let fixture = format!("{}/assets/triplet_111.lax", env!("CARGO_MANIFEST_DIR"));
    let explicit = Command::new(bin)
        .args(["run", &fixture, "--seed", "19", "--format", "jsonl"])
        .output()
        .expect("binary runs");
    let via_env = Command::new(bin)
        .args(["run", &fixture, "--format", "jsonl"])
        .env("LAXFORM_SEED", "19")
        .output()
        .expect("binary runs");
    assert_eq!(explicit.stdout, via_env.stdout);
    let other = Command::new(bin)
        .args(["run", &fixture, "--seed", "20", "--format", "jsonl"])
        .output()
        .expect("binary runs");
    assert_ne!(explicit.stdout, other.stdout);
}
