//! Scenario files, verification suites, brute-force oracles and reports.

pub mod oracle;
pub mod report;
pub mod scenario;
pub mod suites;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use oracle::{compare_engine, BruteForce, GridBruteForce, OracleOutcome, RandomDigraph};
pub use report::{emit_report, Check, Format, Provenance, Report, SeriesRow, Summary, Timing, Verdict, Witness};
pub use scenario::{LambdaSpec, Scenario, Suite, SystemSpec, OUTPUT_ENV};

use crate::Result;
use suites::{run_suite, Ctx, SuiteOutput};

/// Runs the selected suites. Maps and graphs are built first; the suites
/// then run concurrently and are assembled in their fixed order.
pub fn run_scenario(sc: &Scenario) -> Result<Report> {
    sc.validate()?;
    let start = Instant::now();
    let order = sc.ordered_suites();
    let needs_levels = order.iter().any(|s| *s != Suite::Oracle);
    let cx = Ctx::build(sc, needs_levels)?;
    let outputs: Vec<(Suite, Result<SuiteOutput>, f64)> = order
        .par_iter()
        .map(|&s| {
            let t = Instant::now();
            let r = run_suite(&cx, s);
            (s, r, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut checks = Vec::new();
    let mut series = Vec::new();
    let mut timing = Timing::default();
    for (s, r, secs) in outputs {
        let o = r?;
        checks.extend(o.checks);
        series.extend(o.series);
        timing.suites.insert(s.name().to_string(), secs);
    }
    timing.total_seconds = start.elapsed().as_secs_f64();
    Ok(Report {
        provenance: Provenance {
            scenario: sc.name.clone(),
            config_hash: sc.config_hash(),
            seed: sc.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        suites: order,
        summary: Summary::of(&checks),
        checks,
        series,
        timing,
    })
}

/// Loads a scenario file, runs it and writes every report format into its
/// output directory.
pub fn run_config(path: &Path) -> Result<(Report, Vec<PathBuf>)> {
    let sc = Scenario::load(path)?;
    let report = run_scenario(&sc)?;
    let files = emit_report(&report, &sc.output_dir(), &Format::ALL)?;
    Ok((report, files))
}
