use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenario::Suite;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    HypothesesNotMet,
    ResolutionInsufficient,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::HypothesesNotMet => "hypotheses-not-met",
            Verdict::ResolutionInsufficient => "resolution-insufficient",
        }
    }
}

/// Data that lets a failure be replayed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Cells { cells: Vec<usize> },
    /// Consecutive cells of a chain.
    Path { cells: Vec<usize> },
    Points { points: Vec<Vec<f64>> },
    Digraph { succ: Vec<Vec<usize>>, seed: u64, density: f64, query: String },
    Values { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub system: String,
    pub resolution: Option<usize>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub verdict: Verdict,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
    pub witness: Option<Witness>,
}

impl Check {
    pub fn new(suite: Suite, name: &str, system: &str) -> Self {
        Check {
            suite,
            name: name.into(),
            system: system.into(),
            resolution: None,
            delta: None,
            epsilon: None,
            verdict: Verdict::Pass,
            detail: String::new(),
            metrics: BTreeMap::new(),
            witness: None,
        }
    }

    pub fn at(mut self, n: usize) -> Self {
        self.resolution = Some(n);
        self
    }

    pub fn delta(mut self, d: f64) -> Self {
        self.delta = Some(d);
        self
    }

    pub fn epsilon(mut self, e: f64) -> Self {
        self.epsilon = Some(e);
        self
    }

    /// Non-finite values are dropped so the report stays valid JSON.
    pub fn metric(mut self, key: &str, value: f64) -> Self {
        if value.is_finite() {
            self.metrics.insert(key.into(), value);
        }
        self
    }

    pub fn pass(mut self, detail: impl Into<String>) -> Self {
        self.verdict = Verdict::Pass;
        self.detail = detail.into();
        self
    }

    pub fn fail(mut self, detail: impl Into<String>, witness: Witness) -> Self {
        self.verdict = Verdict::Fail;
        self.detail = detail.into();
        self.witness = Some(witness);
        self
    }

    pub fn not_met(mut self, detail: impl Into<String>) -> Self {
        self.verdict = Verdict::HypothesesNotMet;
        self.detail = detail.into();
        self
    }

    pub fn insufficient(mut self, detail: impl Into<String>) -> Self {
        self.verdict = Verdict::ResolutionInsufficient;
        self.detail = detail.into();
        self
    }

    /// Pass when `ok`, otherwise fail with `witness`.
    pub fn expect(self, ok: bool, detail: impl Into<String>, witness: impl FnOnce() -> Witness) -> Self {
        if ok {
            self.pass(detail)
        } else {
            self.fail(detail, witness())
        }
    }

    pub fn with_witness(mut self, w: Witness) -> Self {
        self.witness = Some(w);
        self
    }
}

/// One point of a plot-ready series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub series: String,
    pub system: String,
    pub resolution: Option<usize>,
    pub index: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub hypotheses_not_met: usize,
    pub resolution_insufficient: usize,
}

impl Summary {
    pub fn of(checks: &[Check]) -> Self {
        let mut s = Summary::default();
        for c in checks {
            match c.verdict {
                Verdict::Pass => s.pass += 1,
                Verdict::Fail => s.fail += 1,
                Verdict::HypothesesNotMet => s.hypotheses_not_met += 1,
                Verdict::ResolutionInsufficient => s.resolution_insufficient += 1,
            }
        }
        s
    }
}

/// Wall-clock seconds; kept out of the main report so it stays byte-stable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub suites: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub suites: Vec<Suite>,
    pub summary: Summary,
    pub checks: Vec<Check>,
    pub series: Vec<SeriesRow>,
    #[serde(skip)]
    pub timing: Timing,
}

impl Report {
    /// 0 all pass, 1 any fail, 3 any resolution-insufficient (fail wins).
    pub fn exit_code(&self) -> i32 {
        if self.summary.fail > 0 {
            1
        } else if self.summary.resolution_insufficient > 0 {
            3
        } else {
            0
        }
    }

    pub fn checks_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    /// Fails without witnesses, which the report format does not allow.
    pub fn unreplayable_failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.verdict == Verdict::Fail && c.witness.is_none()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("report.json: {e}")))
    }

    pub fn checks_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "suite", "check", "system", "resolution", "delta", "epsilon", "verdict", "detail", "metrics", "witness",
        ])
        .expect("in-memory write");
        let opt = |v: Option<String>| v.unwrap_or_default();
        for c in &self.checks {
            let metrics: Vec<String> = c.metrics.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let witness = c.witness.as_ref().map(|w| serde_json::to_string(w).expect("witness serializes"));
            w.write_record([
                c.suite.name().to_string(),
                c.name.clone(),
                c.system.clone(),
                opt(c.resolution.map(|n| n.to_string())),
                opt(c.delta.map(|d| d.to_string())),
                opt(c.epsilon.map(|e| e.to_string())),
                c.verdict.as_str().to_string(),
                c.detail.clone(),
                metrics.join(";"),
                opt(witness),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn series_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["series", "system", "resolution", "index", "value"]).expect("in-memory write");
        for r in &self.series {
            w.write_record([
                r.series.clone(),
                r.system.clone(),
                r.resolution.map(|n| n.to_string()).unwrap_or_default(),
                r.index.to_string(),
                r.value.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_text(&self) -> String {
        let p = &self.provenance;
        let s = &self.summary;
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}  seed {}  version {}", p.scenario, p.seed, p.version);
        let _ = writeln!(out, "config sha256 {}", p.config_hash);
        let names: Vec<&str> = self.suites.iter().map(|s| s.name()).collect();
        let _ = writeln!(out, "suites: {}", if names.is_empty() { "(none)".into() } else { names.join(", ") });
        let _ = writeln!(
            out,
            "{} pass, {} fail, {} hypotheses-not-met, {} resolution-insufficient\n",
            s.pass, s.fail, s.hypotheses_not_met, s.resolution_insufficient
        );
        for c in &self.checks {
            let mut at = Vec::new();
            if let Some(n) = c.resolution {
                at.push(format!("n={n}"));
            }
            if let Some(d) = c.delta {
                at.push(format!("δ={d:.3e}"));
            }
            if let Some(e) = c.epsilon {
                at.push(format!("ε={e:.3e}"));
            }
            let _ = writeln!(
                out,
                "[{:<23}] {}/{} {} {}",
                c.verdict.as_str(),
                c.suite.name(),
                c.name,
                c.system,
                at.join(" ")
            );
            if !c.detail.is_empty() {
                let _ = writeln!(out, "    {}", c.detail);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Series,
    Text,
    Timing,
}

impl Format {
    pub const ALL: [Format; 5] = [Format::Json, Format::Csv, Format::Series, Format::Text, Format::Timing];

    pub fn file_name(self) -> &'static str {
        match self {
            Format::Json => "report.json",
            Format::Csv => "checks.csv",
            Format::Series => "series.csv",
            Format::Text => "report.txt",
            Format::Timing => "timing.json",
        }
    }
}

fn write(path: PathBuf, body: &str) -> Result<PathBuf> {
    fs::write(&path, body).map_err(|source| Error::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes the requested files into `dir`, creating it if needed.
pub fn emit_report(report: &Report, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    formats
        .iter()
        .map(|&f| {
            let body = match f {
                Format::Json => report.to_json(),
                Format::Csv => report.checks_csv(),
                Format::Series => report.series_csv(),
                Format::Text => report.to_text(),
                Format::Timing => {
                    let mut s = serde_json::to_string_pretty(&report.timing).expect("timing serializes");
                    s.push('\n');
                    s
                }
            };
            write(dir.join(f.file_name()), &body)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty() -> Report {
        Report {
            provenance: Provenance { scenario: "empty".into(), config_hash: "00".into(), seed: 1, version: "0".into() },
            suites: Vec::new(),
            summary: Summary::default(),
            checks: Vec::new(),
            series: Vec::new(),
            timing: Timing::default(),
        }
    }

    #[test]
    fn empty_report_has_header_and_no_checks() {
        let r = empty();
        assert_eq!(r.checks_csv().lines().count(), 1);
        assert!(r.to_text().contains("suites: (none)"));
        assert_eq!(r.exit_code(), 0);
        let back = Report::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn exit_codes_rank_fail_first() {
        let mut r = empty();
        let c = Check::new(Suite::Oracle, "x", "s");
        r.checks = vec![c.clone().insufficient("coarse")];
        r.summary = Summary::of(&r.checks);
        assert_eq!(r.exit_code(), 3);
        r.checks.push(c.clone().fail("bad", Witness::Cells { cells: vec![1] }));
        r.checks.push(c.not_met("no"));
        r.summary = Summary::of(&r.checks);
        assert_eq!(r.exit_code(), 1);
        assert!(r.unreplayable_failures().is_empty());
    }

    #[test]
    fn timing_is_not_in_the_main_report() {
        let mut r = empty();
        r.timing.total_seconds = 12.5;
        assert!(!r.to_json().contains("12.5"));
    }

    #[test]
    fn non_finite_metrics_are_dropped() {
        let c = Check::new(Suite::Shadowing, "m", "s").metric("a", f64::INFINITY).metric("b", 1.0);
        assert_eq!(c.metrics.len(), 1);
    }

    #[test]
    fn emits_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&empty(), dir.path(), &Format::ALL).unwrap();
        assert_eq!(paths.len(), 5);
        assert!(paths.iter().all(|p| p.exists()));
        let blocked = dir.path().join("report.json").join("sub");
        assert!(matches!(emit_report(&empty(), &blocked, &[Format::Json]), Err(Error::Io { .. })));
    }
}
