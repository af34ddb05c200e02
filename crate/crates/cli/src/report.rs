//! Versioned reports and their JSON, CSV and text renderings.

use serde::Serialize;

use crate::scenario::{Tolerances, Verb};

pub const SCHEMA: &str = "ncpb-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Skipped,
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Skipped => "skipped",
            Verdict::Pass => "pass",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Fail => "fail",
        }
    }

    /// 0 pass, 1 failed assertion, 2 inconclusive present.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Skipped | Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    /// value ≤ limit.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            verdict: if value <= limit { Verdict::Pass } else { Verdict::Fail },
            value: Some(value),
            limit: Some(limit),
            detail: String::new(),
        }
    }

    /// value ≥ limit.
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            verdict: if value >= limit { Verdict::Pass } else { Verdict::Fail },
            value: Some(value),
            limit: Some(limit),
            detail: String::new(),
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            value: None,
            limit: None,
            detail: detail.into(),
        }
    }

    pub fn equal<T: PartialEq + std::fmt::Debug>(name: impl Into<String>, got: T, expected: T) -> Self {
        let ok = got == expected;
        Self::holds(name, ok, format!("got {got:?}, expected {expected:?}"))
    }

    pub fn inconclusive(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            verdict: Verdict::Inconclusive,
            value: None,
            limit: None,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub analysis: Verb,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub result: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub wall_clock_s: f64,
}

impl AnalysisReport {
    pub fn new(analysis: Verb, checks: Vec<Check>, result: serde_json::Value, note: Option<String>) -> Self {
        let verdict = if checks.is_empty() {
            Verdict::Skipped
        } else {
            checks.iter().map(|c| c.verdict).max().unwrap_or(Verdict::Pass)
        };
        Self {
            analysis,
            verdict,
            checks,
            result,
            note,
            wall_clock_s: 0.0,
        }
    }

    pub fn skipped(analysis: Verb, reason: impl Into<String>) -> Self {
        Self::new(analysis, vec![], serde_json::Value::Null, Some(reason.into()))
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub library_version: &'static str,
    pub scenario: String,
    pub scenario_hash: String,
    pub verb: Verb,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub analyses: Vec<AnalysisReport>,
    pub summary: Summary,
    pub verdict: Verdict,
    /// The only field that varies between identical runs.
    pub wall_clock_s: f64,
}

impl Report {
    pub fn summarize(&mut self) {
        let mut s = Summary::default();
        for a in &self.analyses {
            match a.verdict {
                Verdict::Pass => s.pass += 1,
                Verdict::Fail => s.fail += 1,
                Verdict::Inconclusive => s.inconclusive += 1,
                Verdict::Skipped => s.skipped += 1,
            }
        }
        self.summary = s;
        self.verdict = self
            .analyses
            .iter()
            .map(|a| a.verdict)
            .max()
            .unwrap_or(Verdict::Skipped);
        // an explicit verb that could not run verifies nothing
        if self.verb != Verb::VerifyAll && self.verdict == Verdict::Skipped {
            self.verdict = Verdict::Inconclusive;
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

pub fn render(reports: &[Report], format: Format) -> String {
    match format {
        Format::Json => {
            let v = if reports.len() == 1 {
                serde_json::to_value(&reports[0])
            } else {
                serde_json::to_value(reports)
            };
            let mut s = serde_json::to_string_pretty(&v.expect("reports serialize")).expect("JSON text");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(vec![]);
            w.write_record(["scenario", "analysis", "check", "value", "limit", "verdict", "detail"])
                .expect("in-memory CSV");
            for r in reports {
                for a in &r.analyses {
                    if a.checks.is_empty() {
                        w.write_record([
                            r.scenario.as_str(),
                            a.analysis.name(),
                            "",
                            "",
                            "",
                            a.verdict.name(),
                            a.note.as_deref().unwrap_or(""),
                        ])
                        .expect("in-memory CSV");
                    }
                    for c in &a.checks {
                        let num = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
                        w.write_record([
                            r.scenario.as_str(),
                            a.analysis.name(),
                            c.name.as_str(),
                            &num(c.value),
                            &num(c.limit),
                            c.verdict.name(),
                            c.detail.as_str(),
                        ])
                        .expect("in-memory CSV");
                    }
                }
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("UTF-8 CSV")
        }
        Format::Text => {
            let mut out = String::new();
            for r in reports {
                out.push_str(&format!(
                    "{} [{}] {}: {} ({} pass, {} fail, {} inconclusive, {} skipped) in {:.2}s\n",
                    r.scenario,
                    &r.scenario_hash[..12],
                    r.verb.name(),
                    r.verdict.name().to_uppercase(),
                    r.summary.pass,
                    r.summary.fail,
                    r.summary.inconclusive,
                    r.summary.skipped,
                    r.wall_clock_s,
                ));
                for a in &r.analyses {
                    out.push_str(&format!("  {:<18} {}", a.analysis.name(), a.verdict.name()));
                    if let Some(n) = &a.note {
                        out.push_str(&format!(" ({n})"));
                    }
                    out.push('\n');
                    for c in &a.checks {
                        out.push_str(&format!("    {:<40} {:<12}", c.name, c.verdict.name()));
                        if let (Some(v), Some(l)) = (c.value, c.limit) {
                            out.push_str(&format!(" {v:.3e} vs {l:.1e}"));
                        }
                        if !c.detail.is_empty() {
                            out.push_str(&format!(" {}", c.detail));
                        }
                        out.push('\n');
                    }
                }
            }
            out
        }
    }
}
