use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use ionaddr_cli::scenario::{GridSection, SweepSection};
use ionaddr_cli::{
    cmd_crystal, cmd_design, cmd_sweep, exit, CliError, RunReport, Scenario, SweepRequest, SCHEMA_VERSION,
};

/// Default directory for reports when `--report` is not given.
const OUT_DIR_ENV: &str = "IONADDR_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "ionaddr",
    about = "Design and simulate integrated single-ion addressing optics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the ion crystal and print positions and gaps.
    Crystal {
        scenario: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Pitch plan, lens-stack synthesis, channel foci and crosstalk.
    Design {
        scenario: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Focal-plane field of the centre channel (.csv, otherwise SFLD binary).
        #[arg(long)]
        dump_field: Option<PathBuf>,
        /// Simulation grid override: nx,ny,pitch_um.
        #[arg(long, value_parser = GridSection::parse)]
        grid: Option<GridSection>,
    },
    /// Tolerance sweep on the outermost channel; writes a CSV table beside
    /// the JSON report.
    Sweep {
        scenario: PathBuf,
        #[arg(long, conflicts_with = "param")]
        preset: Option<String>,
        /// name=start:end:steps (um or deg); repeatable.
        #[arg(long, value_parser = SweepSection::parse)]
        param: Vec<SweepSection>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_parser = GridSection::parse)]
        grid: Option<GridSection>,
    },
    /// Print toolkit and report schema versions.
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::from(exit::SUCCESS),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn load(path: &Path, grid: Option<GridSection>) -> Result<Scenario, CliError> {
    let mut s = Scenario::load(path)?;
    if let Some(g) = grid {
        s.grid = g;
    }
    Ok(s)
}

/// `--report`, else `$IONADDR_OUT_DIR/<stem>.<command>.json`.
fn report_path(explicit: Option<PathBuf>, scenario: &Path, command: &str) -> Option<PathBuf> {
    explicit.or_else(|| {
        let dir = std::env::var_os(OUT_DIR_ENV)?;
        let stem = scenario.file_stem()?.to_string_lossy().into_owned();
        Some(PathBuf::from(dir).join(format!("{stem}.{command}.json")))
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

fn finish(mut report: RunReport, start: Instant, path: Option<&Path>) -> Result<RunReport, CliError> {
    report.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(p) = path {
        write(p, &report.to_json())?;
        eprintln!("report written to {}", p.display());
    }
    Ok(report)
}

fn run(command: Command) -> Result<(), CliError> {
    let start = Instant::now();
    match command {
        Command::Version => {
            println!("ionaddr {} (report schema {SCHEMA_VERSION})", env!("CARGO_PKG_VERSION"));
        }
        Command::Crystal { scenario, report } => {
            let s = load(&scenario, None)?;
            let path = report_path(report, &scenario, "crystal");
            let r = finish(cmd_crystal(&s)?, start, path.as_deref())?;
            println!("{:>4} {:>14} {:>10}", "ion", "position_um", "gap_um");
            for (i, x) in r.crystal.positions_um.iter().enumerate() {
                let gap = i
                    .checked_sub(1)
                    .map_or(String::new(), |j| format!("{:.4}", r.crystal.gaps_um[j]));
                println!("{i:>4} {x:>14.4} {gap:>10}");
            }
        }
        Command::Design {
            scenario,
            report,
            dump_field,
            grid,
        } => {
            let s = load(&scenario, grid)?;
            let path = report_path(report, &scenario, "design");
            let r = finish(cmd_design(&s, dump_field.as_deref())?, start, path.as_deref())?;
            if let Some((lo, hi)) = r.pitch_plan.as_ref().and_then(|p| p.min_gap_um.zip(p.max_gap_um)) {
                println!("waveguide gaps {lo:.3}..{hi:.3} um");
            }
            println!(
                "{:>3} {:>12} {:>12} {:>10} {:>10} {:>9}",
                "ch", "image_um", "z_focus_um", "mfd_x_um", "mfd_y_um", "clipped"
            );
            for c in r.channels.iter().flatten() {
                println!(
                    "{:>3} {:>12.3} {:>12.3} {:>10.3} {:>10.3} {:>9.2e}",
                    c.channel,
                    c.image_position_um,
                    c.z_focus_um,
                    c.mfd_moment_um[0],
                    c.mfd_moment_um[1],
                    c.clipped_fraction
                );
            }
            if let Some(w) = r.crosstalk.as_ref().and_then(|x| x.worst_nearest_neighbour_db) {
                println!("worst nearest-neighbour crosstalk {w:.2} dB");
            }
        }
        Command::Sweep {
            scenario,
            preset,
            param,
            report,
            grid,
        } => {
            let s = load(&scenario, grid)?;
            let request = match (preset, param.is_empty()) {
                (Some(p), _) => SweepRequest::Preset(p),
                (None, false) => SweepRequest::Params(param),
                (None, true) => SweepRequest::Scenario,
            };
            let path = report_path(report, &scenario, "sweep");
            let r = finish(cmd_sweep(&s, &request)?, start, path.as_deref())?;
            let csv = r.sweep.as_ref().map(|w| w.to_csv()).unwrap_or_default();
            match path {
                Some(p) => {
                    let table = p.with_extension("csv");
                    write(&table, &csv)?;
                    eprintln!("sweep table written to {}", table.display());
                }
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}
