use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dtn_probe::experiment::{self, render_manifest, RunConfig, RunReport};
use dtn_probe::Error;

#[derive(Parser)]
#[command(name = "dtn-probe", version, about = "Boundary probing experiments for semilinear elliptic equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment, or `all`.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        experiment: String,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Output directory (overrides DTN_PROBE_OUT and the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration file without solving anything.
    ValidateConfig { path: PathBuf },
    /// Re-render the plots of a finished run and print its summary.
    Report { dir: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ConfigParse(_) => 2,
        _ => 3,
    }
}

fn print_report(r: &RunReport) {
    for o in &r.outcomes {
        println!("== {} ({:.1} s)", o.name, o.wall_clock_s);
        for note in &o.notes {
            println!("   note: {note}");
        }
        for c in &o.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            println!("   [{tag}] {}: {:.6e} (required {})", c.name, c.value, c.requirement);
        }
    }
    println!("overall: {}", if r.passed { "PASS" } else { "FAIL" });
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, experiment, workers, out } => RunConfig::load(&config).and_then(|cfg| {
            let dir = experiment::resolve_output_dir(out.as_deref(), &cfg);
            let report = experiment::run(&cfg, &experiment, &dir, workers)?;
            print_report(&report);
            println!("results written to {}", dir.display());
            Ok(if report.passed { 0 } else { 1 })
        }),
        Command::ValidateConfig { path } => RunConfig::load(&path).and_then(|cfg| cfg.validate()).map(|()| {
            println!("{}: ok", path.display());
            0
        }),
        Command::Report { dir } => RunReport::read(&dir).and_then(|report| {
            let svgs = render_manifest(&dir)?;
            print_report(&report);
            println!("rendered {} plot(s)", svgs.len());
            Ok(if report.passed { 0 } else { 1 })
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
