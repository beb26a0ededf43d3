//! Execution planning: map a parsed document onto the verification
//! batteries, run them (in parallel, with per-check seeds derived from the
//! root seed), and assemble the report in declaration order.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use laxform_core::check::CheckResult;
use laxform_core::zm::{PoleData, ZmSystem};
use laxform_core::{akns, derive_seed, zm};

use crate::report::{Record, Report};
use crate::spec::{CheckName, Construct, SpecDocument};

/// Input-level problems (exit code 2).
#[derive(Debug, Clone)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: u32,
    pub dim: usize,
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRIALS: u32 = 5;
pub const DEFAULT_DIM: usize = 2;

/// Resolve the effective configuration: command-line overrides beat document
/// options, which beat the environment seed, which beats the defaults.
pub fn resolve_config(
    doc: &SpecDocument,
    cli_seed: Option<u64>,
    cli_trials: Option<u32>,
    cli_dim: Option<usize>,
    env_seed: Option<u64>,
) -> RunConfig {
    RunConfig {
        seed: cli_seed.or(doc.options.seed).or(env_seed).unwrap_or(DEFAULT_SEED),
        trials: cli_trials.or(doc.options.trials).unwrap_or(DEFAULT_TRIALS).max(1),
        dim: cli_dim.or(doc.options.dim.map(|d| d as usize)).unwrap_or(DEFAULT_DIM).max(1),
    }
}

enum Task {
    VariationalDerivatives(PoleData),
    Compatibility(PoleData),
    Isospectral(PoleData),
    Mdc,
    Closure(PoleData),
    ElClasses(PoleData, Option<u32>),
    Ghost(PoleData),
    AknsRecursion(u32),
    AknsHierarchy,
    AknsConsistency(u32),
    AknsCrossRoute,
    AknsExpansion,
    AknsScalarEl,
    AknsL23Flow,
    AknsScalarMultiform { corrupt: bool },
    GaugeConsistency,
}

impl Task {
    fn label(&self) -> &'static str {
        match self {
            Task::VariationalDerivatives(_) => "vder",
            Task::Compatibility(_) => "compat",
            Task::Isospectral(_) => "isospectral",
            Task::Mdc => "mdc",
            Task::Closure(_) => "closure",
            Task::ElClasses(..) => "el_classes",
            Task::Ghost(_) => "ghost",
            Task::AknsRecursion(_) => "qtower",
            Task::AknsHierarchy => "hierarchy",
            Task::AknsConsistency(_) => "qtower.consistency",
            Task::AknsCrossRoute => "qtower.cross_route",
            Task::AknsExpansion => "hierarchy.expansion",
            Task::AknsScalarEl => "scalar.el",
            Task::AknsL23Flow => "scalar.el.l23_vs_flow",
            Task::AknsScalarMultiform { .. } => "scalar.multiform",
            Task::GaugeConsistency => "gauge",
        }
    }

    fn run(&self, cfg: &RunConfig) -> laxform_core::Result<Vec<CheckResult>> {
        let seed = derive_seed(cfg.seed, self.label());
        match self {
            Task::VariationalDerivatives(p) => zm::verify_variational_derivatives(&ZmSystem::new(p)?),
            Task::Compatibility(p) => zm::verify_compatibility(&ZmSystem::new(p)?),
            Task::Isospectral(p) => zm::verify_isospectral(&ZmSystem::new(p)?, seed, cfg.trials, cfg.dim),
            Task::Mdc => zm::verify_mdc(seed, cfg.trials, cfg.dim),
            Task::Closure(p) => zm::verify_closure(&ZmSystem::new(p)?, seed, cfg.trials, &[cfg.dim]),
            Task::ElClasses(p, order) => zm::verify_el_classes(&ZmSystem::new(p)?, *order),
            Task::Ghost(p) => zm::ghost_reduction(&ZmSystem::new(p)?, seed, cfg.trials, cfg.dim),
            Task::AknsRecursion(tower) => akns::verify_q_recursion(*tower as usize),
            Task::AknsHierarchy => akns::verify_hierarchy_equations(),
            Task::AknsConsistency(tower) => akns::verify_recursion_consistency(*tower as usize),
            Task::AknsCrossRoute => akns::verify_cross_route(),
            Task::AknsExpansion => akns::verify_pole_expansion(),
            Task::AknsScalarEl => akns::verify_scalar_el(),
            Task::AknsL23Flow => akns::verify_l23_flow_equivalence(seed, cfg.trials),
            Task::AknsScalarMultiform { corrupt } => akns::verify_scalar_multiform_with(seed, *corrupt),
            Task::GaugeConsistency => zm::verify_gauge_consistency(),
        }
    }
}

fn pole_data(doc: &SpecDocument, include_g: bool, need_w: Option<usize>) -> Result<PoleData, InputError> {
    // a `poles` statement declares its symbols; an explicit `params`
    // declaration of the same names is allowed but not required
    let family = |key: &str| -> Result<Vec<String>, InputError> {
        let syms = doc.pole_family(key).unwrap_or(&[]).to_vec();
        for s in &syms {
            if doc.coords.contains(s) || doc.fields.iter().any(|f| &f.name == s) {
                return Err(InputError(format!("pole symbol `{}` collides with another declaration", s)));
            }
        }
        Ok(syms)
    };
    let poles_u = family("U")?;
    let poles_v = family("V")?;
    let poles_w = family("W")?;
    if poles_u.is_empty() || poles_v.is_empty() {
        return Err(InputError("pole families U and V must be declared and nonempty".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in poles_u.iter().chain(&poles_v).chain(&poles_w) {
        if !seen.insert(s.clone()) {
            return Err(InputError(format!("pole symbol `{}` appears in two families", s)));
        }
    }
    match need_w {
        Some(1) if poles_w.len() != 1 => {
            return Err(InputError("this construction needs exactly one W pole (the spectral parameter)".into()))
        }
        Some(_) if poles_w.is_empty() => {
            return Err(InputError("this construction needs a nonempty W pole family".into()))
        }
        _ => {}
    }
    Ok(PoleData { poles_u, poles_v, poles_w, include_g })
}

fn require_coords(doc: &SpecDocument, expected: &[String]) -> Result<(), InputError> {
    if doc.coords != expected {
        return Err(InputError(format!(
            "this construction expects `coords {}`, found `coords {}`",
            expected.join(" "),
            doc.coords.join(" ")
        )));
    }
    Ok(())
}

/// Expand the requested checks into concrete tasks; input problems are
/// reported before anything runs.
fn plan(doc: &SpecDocument) -> Result<Vec<Task>, InputError> {
    if doc.checks.is_empty() {
        return Ok(Vec::new());
    }
    let Some(construct) = &doc.construct else {
        return Err(InputError("checks were requested but no construction is declared".into()));
    };
    if let Some(target) = &doc.options.corrupt {
        if target != "l23" {
            return Err(InputError(format!("unknown corruption target `{}`", target)));
        }
        if !matches!(construct, Construct::Akns { .. }) {
            return Err(InputError("option corrupt = l23 applies to the akns construction".into()));
        }
    }
    let corrupt = doc.options.corrupt.is_some();
    let zm_coords: Vec<String> = ["xi", "eta", "nu"].iter().map(|s| s.to_string()).collect();
    let mut tasks: Vec<Task> = Vec::new();
    let mut requested = doc.checks.clone();
    if requested.contains(&CheckName::All) {
        requested = match construct {
            Construct::Zm { .. } => vec![CheckName::El, CheckName::Isospectral, CheckName::Mdc],
            Construct::Triplet => {
                vec![CheckName::El, CheckName::Closure, CheckName::Isospectral, CheckName::Mdc]
            }
            Construct::LaxPair => vec![CheckName::El, CheckName::Closure, CheckName::Ghost, CheckName::Mdc],
            Construct::Akns { .. } => {
                vec![CheckName::El, CheckName::ScalarAkns, CheckName::Mdc]
            }
        };
    }
    for check in requested {
        match (construct, check) {
            (Construct::Zm { include_g }, CheckName::El) => {
                require_coords(doc, &zm_coords)?;
                let p = pole_data(doc, *include_g, None)?;
                tasks.push(Task::VariationalDerivatives(p.clone()));
                tasks.push(Task::Compatibility(p));
                if *include_g {
                    tasks.push(Task::GaugeConsistency);
                }
            }
            (Construct::Zm { include_g }, CheckName::Isospectral) => {
                require_coords(doc, &zm_coords)?;
                tasks.push(Task::Isospectral(pole_data(doc, *include_g, None)?));
            }
            (Construct::Triplet, CheckName::El) => {
                require_coords(doc, &zm_coords)?;
                let p = pole_data(doc, false, Some(2))?;
                tasks.push(Task::VariationalDerivatives(p.clone()));
                tasks.push(Task::Compatibility(p.clone()));
                tasks.push(Task::ElClasses(p, doc.options.max_jet_order));
            }
            (Construct::Triplet, CheckName::Closure) => {
                require_coords(doc, &zm_coords)?;
                tasks.push(Task::Closure(pole_data(doc, false, Some(2))?));
            }
            (Construct::Triplet, CheckName::Isospectral) => {
                require_coords(doc, &zm_coords)?;
                tasks.push(Task::Isospectral(pole_data(doc, false, Some(2))?));
            }
            (Construct::LaxPair, CheckName::El) => {
                require_coords(doc, &zm_coords)?;
                tasks.push(Task::ElClasses(pole_data(doc, false, Some(1))?, doc.options.max_jet_order));
            }
            (Construct::LaxPair, CheckName::Closure) => {
                require_coords(doc, &zm_coords)?;
                tasks.push(Task::Closure(pole_data(doc, false, Some(1))?));
            }
            (Construct::LaxPair, CheckName::Ghost) => {
                require_coords(doc, &zm_coords)?;
                tasks.push(Task::Ghost(pole_data(doc, false, Some(1))?));
            }
            (Construct::Akns { tower }, CheckName::El) => {
                require_akns_coords(doc, *tower)?;
                tasks.push(Task::AknsRecursion(*tower));
                tasks.push(Task::AknsHierarchy);
                tasks.push(Task::AknsConsistency(*tower));
                tasks.push(Task::AknsCrossRoute);
                tasks.push(Task::AknsExpansion);
            }
            (Construct::Akns { tower }, CheckName::Closure) => {
                require_akns_coords(doc, *tower)?;
                tasks.push(Task::AknsScalarMultiform { corrupt });
            }
            (Construct::Akns { tower }, CheckName::ScalarAkns) => {
                require_akns_coords(doc, *tower)?;
                tasks.push(Task::AknsScalarEl);
                tasks.push(Task::AknsL23Flow);
                tasks.push(Task::AknsScalarMultiform { corrupt });
            }
            (_, CheckName::Mdc) => tasks.push(Task::Mdc),
            (c, k) => {
                return Err(InputError(format!(
                    "check `{}` does not apply to the `{}` construction",
                    k, c
                )))
            }
        }
    }
    // drop duplicate tasks from overlapping requests, keeping order
    let mut seen = std::collections::BTreeSet::new();
    tasks.retain(|t| seen.insert(t.label()));
    Ok(tasks)
}

fn require_akns_coords(doc: &SpecDocument, tower: u32) -> Result<(), InputError> {
    let expected: Vec<String> = (1..=tower.max(3)).map(|k| format!("x{}", k)).collect();
    require_coords(doc, &expected)
}

/// Execute a parsed document.
pub fn execute(doc: &SpecDocument, cfg: &RunConfig, input_text: &str) -> Result<Report, InputError> {
    let tasks = plan(doc)?;
    let outcomes: Vec<laxform_core::Result<(Vec<CheckResult>, u64)>> = tasks
        .par_iter()
        .map(|t| {
            let start = Instant::now();
            let checks = t.run(cfg)?;
            Ok((checks, start.elapsed().as_millis() as u64))
        })
        .collect();
    let mut records = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok((checks, ms)) => {
                for c in &checks {
                    let seed = derive_seed(cfg.seed, &c.name);
                    records.push(Record::from_check(c, seed, ms));
                }
            }
            Err(e) => return Err(InputError(format!("engine error: {}", e))),
        }
    }
    Ok(Report::new(records, input_text, cfg.seed))
}
