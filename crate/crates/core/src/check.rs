//! Check outcome records shared by the verification batteries.

use crate::numeric::Verdict;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    /// Exact: canonical equality or a reduction to the canonical zero.
    Pass,
    /// Established only by seeded numeric evaluation below tolerance.
    NumericallyPass,
    Fail,
}

impl std::fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CheckStatus::Pass => "pass",
            CheckStatus::NumericallyPass => "numerically-pass",
            CheckStatus::Fail => "fail",
        };
        f.write_str(s)
    }
}

/// One verified claim: a stable name, the verdict, and the pretty-printed
/// residual (empty when the claim holds exactly).
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub residual: String,
    pub seeds: Vec<u64>,
}

impl CheckResult {
    pub fn pass(name: impl Into<String>) -> Self {
        CheckResult { name: name.into(), status: CheckStatus::Pass, residual: String::new(), seeds: Vec::new() }
    }

    pub fn fail(name: impl Into<String>, residual: impl Into<String>) -> Self {
        CheckResult { name: name.into(), status: CheckStatus::Fail, residual: residual.into(), seeds: Vec::new() }
    }

    pub fn of_bool(name: impl Into<String>, ok: bool, residual: impl Into<String>) -> Self {
        if ok {
            CheckResult::pass(name)
        } else {
            CheckResult::fail(name, residual)
        }
    }

    pub fn from_verdict(name: impl Into<String>, verdict: &Verdict, residual_hint: impl Into<String>) -> Self {
        match verdict {
            Verdict::ProvedZero => CheckResult::pass(name),
            Verdict::NumericallyZero { max_residual, seeds } => CheckResult {
                name: name.into(),
                status: CheckStatus::NumericallyPass,
                residual: format!("max residual {:.3e}", max_residual),
                seeds: seeds.clone(),
            },
            Verdict::Nonzero { witness_seed, residual } => CheckResult {
                name: name.into(),
                status: CheckStatus::Fail,
                residual: format!("residual {:.3e} at seed {} :: {}", residual, witness_seed, residual_hint.into()),
                seeds: vec![*witness_seed],
            },
        }
    }

    pub fn ok(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}
