//! Report assembly and emission.
//!
//! The machine format is json-lines with exactly the fields
//! `{name, verdict, residual, anchor, seed, ms}` per record. For a fixed
//! input and seed the emitted bytes are identical across runs: record order
//! follows declaration order and the `ms` field is written as zero in the
//! machine format (wall time is shown in the text table instead).

use serde::{Deserialize, Serialize};

use laxform_core::check::{CheckResult, CheckStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub name: String,
    pub verdict: String,
    pub residual: String,
    pub anchor: String,
    pub seed: u64,
    pub ms: u64,
}

impl Record {
    pub fn from_check(check: &CheckResult, seed: u64, ms: u64) -> Record {
        Record {
            name: check.name.clone(),
            verdict: check.status.to_string(),
            residual: check.residual.clone(),
            anchor: anchor_of(&check.name),
            seed,
            ms,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != CheckStatus::Fail.to_string()
    }
}

/// The claim family: the leading dotted segments of the check name.
pub fn anchor_of(name: &str) -> String {
    let parts: Vec<&str> = name.split('.').collect();
    if parts.len() <= 2 {
        name.to_string()
    } else {
        parts[..2].join(".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub records: Vec<Record>,
    pub tool_version: String,
    pub input_hash: String,
    pub root_seed: u64,
}

impl Report {
    pub fn new(records: Vec<Record>, input: &str, root_seed: u64) -> Report {
        Report {
            records,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_hash: format!("{:016x}", laxform_core::derive_seed(0, input)),
            root_seed,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.passed())
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let mut pass = 0;
        let mut numeric = 0;
        let mut fail = 0;
        for r in &self.records {
            match r.verdict.as_str() {
                "pass" => pass += 1,
                "numerically-pass" => numeric += 1,
                _ => fail += 1,
            }
        }
        (pass, numeric, fail)
    }

    /// Aligned human-readable table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "laxform {}  input {}  seed {}\n",
            self.tool_version, self.input_hash, self.root_seed
        ));
        let name_w = self.records.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        let verdict_w = self.records.iter().map(|r| r.verdict.len()).max().unwrap_or(7).max(7);
        out.push_str(&format!("{:<name_w$}  {:<verdict_w$}  {:>6}  residual\n", "name", "verdict", "ms"));
        for r in &self.records {
            let residual = if r.residual.len() > 72 {
                format!("{}...", &r.residual[..69])
            } else {
                r.residual.clone()
            };
            out.push_str(&format!(
                "{:<name_w$}  {:<verdict_w$}  {:>6}  {}\n",
                r.name, r.verdict, r.ms, residual
            ));
        }
        let (p, n, f) = self.counts();
        out.push_str(&format!(
            "{} checks: {} pass, {} numerically-pass, {} fail\n",
            self.records.len(),
            p,
            n,
            f
        ));
        out
    }

    /// One json object per record; byte-identical across runs for a fixed
    /// input and seed.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let frozen = Record { ms: 0, ..r.clone() };
            out.push_str(&serde_json::to_string(&frozen).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parse the machine format back into records.
    pub fn parse_jsonl(text: &str) -> Result<Vec<Record>, serde_json::Error> {
        text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let checks = vec![
            CheckResult::pass("closure.triplet.111"),
            CheckResult::fail("scalar.closure", "residual 1e-1"),
        ];
        let records = checks
            .iter()
            .enumerate()
            .map(|(i, c)| Record::from_check(c, 100 + i as u64, 3))
            .collect();
        Report::new(records, "spec text", 7)
    }

    #[test]
    fn jsonl_round_trip() {
        let report = sample();
        let text = report.to_jsonl();
        let parsed = Report::parse_jsonl(&text).unwrap();
        let frozen: Vec<Record> = report.records.iter().map(|r| Record { ms: 0, ..r.clone() }).collect();
        assert_eq!(parsed, frozen);
    }

    #[test]
    fn jsonl_fields_are_exactly_the_schema() {
        let report = sample();
        let first = report.to_jsonl().lines().next().unwrap().to_string();
        let value: serde_json::Value = serde_json::from_str(&first).unwrap();
        let obj = value.as_object().unwrap();
        let keys: Vec<&str> = obj.keys().map(|s| s.as_str()).collect();
        assert_eq!(keys, vec!["anchor", "ms", "name", "residual", "seed", "verdict"]);
    }

    #[test]
    fn exit_code_reflects_failures() {
        let report = sample();
        assert_eq!(report.exit_code(), 1);
        let ok = Report::new(
            vec![Record::from_check(&CheckResult::pass("x.y"), 1, 1)],
            "s",
            1,
        );
        assert_eq!(ok.exit_code(), 0);
    }

    #[test]
    fn empty_report_is_header_only() {
        let report = Report::new(vec![], "", 0);
        let text = report.to_text();
        assert!(text.contains("0 checks"));
        assert_eq!(report.to_jsonl(), "");
    }
}
