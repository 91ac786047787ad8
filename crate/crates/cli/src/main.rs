//! `apollo`: census, admissibility, exponential sums, spectra and rendering
//! for integral Apollonian gaskets.
//!
//! Exit codes: 0 pass, 1 invariant failure, 2 invalid input, 3 resource cap.

mod cache;
mod commands;
mod config;
mod registry;
mod render;
mod report;
mod snapshot;
mod verify;

use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use commands::{CircleArgs, ExpsumArgs, GasketArgs, RenderArgs, SingularArgs, SpectralArgs};
use config::{CliError, CliResult, GlobalArgs, RunConfig};
use verify::VerifyArgs;

#[derive(Parser, Debug)]
#[command(name = "apollo", version, about = "Experiments on integral Apollonian gaskets")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate curvatures up to --limit; census of exceptions per dyadic block.
    Gasket(GasketArgs),
    /// Admissible residue classes mod each --q.
    Admissible,
    /// Norm-ball counts in Γ and the fitted growth exponent.
    DeltaFit,
    /// One exponential sum S_f(q0, r; n, m), direct and closed form.
    Expsum(ExpsumArgs),
    /// Truncated singular series at each --n.
    Singular(SingularArgs),
    /// Spectral gap, alternation length and transference for Γ̄ mod --q.
    Spectral(SpectralArgs),
    /// Major/minor-arc decomposition of the smoothed representation count.
    Circle(CircleArgs),
    /// Run the invariant suite and compare against the frozen-constant registry.
    Verify(VerifyArgs),
    /// Draw the gasket as a labelled SVG (written to --out).
    Render(RenderArgs),
}

fn run(cli: &Cli) -> CliResult<bool> {
    let g = &cli.global;
    let cfg = RunConfig::from_args(g)?;
    if let Some(k) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Input(format!("--threads: {e}")))?;
    }
    let start = Instant::now();
    let mut report = match &cli.command {
        Command::Gasket(a) => commands::gasket(&cfg, a)?,
        Command::Admissible => commands::admissible(&cfg)?,
        Command::DeltaFit => commands::delta_fit(&cfg)?,
        Command::Expsum(a) => commands::expsum(&cfg, a)?,
        Command::Singular(a) => commands::singular(&cfg, a)?,
        Command::Spectral(a) => commands::spectral(&cfg, a)?,
        Command::Circle(a) => commands::circle(&cfg, a)?,
        Command::Verify(a) => verify::verify(&cfg, a, g.freeze, g.ci)?,
        Command::Render(a) => {
            let Some(out) = &g.out else {
                return config::input_err("render needs --out PATH for the SVG");
            };
            let (mut report, svg) = commands::render(&cfg, a)?;
            std::fs::write(out, svg)?;
            report.line(format!("wrote {}", out.display()));
            report.timing = start.elapsed();
            report.emit(g.format, None)?;
            return Ok(report.pass);
        }
    };
    report.timing = start.elapsed();
    report.emit(g.format, g.out.as_deref())?;
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
