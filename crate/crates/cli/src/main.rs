use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaintopo::harness::scenario::OracleSpec;
use chaintopo::harness::{emit_report, run_scenario, Format, Report, Scenario, Suite, SystemSpec};
use chaintopo::Error;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "chaintopo", version, about = "Chain recurrence, attractors and shadowing on grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every suite listed in a scenario file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the file; CHAINTOPO_OUT overrides both).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one suite on a builtin system with default regions.
    Verify {
        suite: String,
        #[arg(long)]
        system: String,
        /// Grid resolution (cells per axis).
        #[arg(long)]
        grid: Option<usize>,
        /// Chain step in cell diameters.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the engine with brute force on seeded random digraphs.
    Oracle {
        #[arg(long, default_value_t = 12)]
        nodes: usize,
        #[arg(long, default_value_t = 0.2)]
        density: f64,
        #[arg(long, default_value_t = 1000)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a stored report as CSV or text.
    Report {
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        /// Directory holding report.json.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Text,
}

fn execute(mut sc: Scenario, out: Option<PathBuf>) -> Result<Report, Error> {
    if out.is_some() {
        sc.output = out;
    }
    let report = run_scenario(&sc)?;
    let dir = sc.output_dir();
    emit_report(&report, &dir, &Format::ALL)?;
    print!("{}", report.to_text());
    println!("\nreport written to {}", dir.display());
    Ok(report)
}

fn read_report(dir: &Path) -> Result<Report, Error> {
    let path = dir.join(Format::Json.file_name());
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io { path, source })?;
    Report::from_json(&text)
}

fn main_inner(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Run { config, out } => {
            let sc = Scenario::load(&config)?;
            Ok(execute(sc, out)?.exit_code())
        }
        Command::Verify { suite, system, grid, delta, seed, out } => {
            let suite: Suite = suite.parse()?;
            let sc = Scenario::preset(suite, &system, grid, delta, seed).map_err(|e| match e {
                Error::Argument(m) => Error::Config(m),
                other => other,
            })?;
            Ok(execute(sc, out)?.exit_code())
        }
        Command::Oracle { nodes, density, seeds, out } => {
            let sc = Scenario {
                name: format!("oracle-n{nodes}-p{density}"),
                system: SystemSpec::RandomDigraph { nodes, density, seed: 0 },
                suites: vec![Suite::Oracle],
                oracle: OracleSpec { nodes: Some(nodes), densities: vec![density], seeds, ..OracleSpec::default() },
                ..Scenario::from_toml_str("[system]\nkind = \"random_digraph\"\nnodes = 1\ndensity = 0.0\nseed = 0\n")?
            };
            sc.validate()?;
            Ok(execute(sc, out)?.exit_code())
        }
        Command::Report { format, out } => {
            let report = read_report(&out)?;
            match format {
                ReportFormat::Csv => print!("{}", report.checks_csv()),
                ReportFormat::Text => print!("{}", report.to_text()),
            }
            Ok(report.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Io { .. } => 2,
                _ => 1,
            })
        }
    }
}
