//! Sweep driver for cavity interferometry and work statistics: each
//! subcommand evaluates its quantity over a grid of inverse temperatures,
//! displacements, and probe phases, and prints one row per grid point.

mod config;
mod output;
mod runner;

use clap::{Parser, Subcommand};

use config::{CommonArgs, OutputFormat, Settings};

#[derive(Parser)]
#[command(
    name = "cavjar",
    version,
    about = "Cavity fringe contrasts, work statistics, and free-energy estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compare the three fringe-contrast routes on displaced thermal states
    Visibility(CommonArgs),
    /// Check exponential work averages against the free-energy drop
    Jarzynski(CommonArgs),
    /// Estimate free-energy drops from pairs of fringe contrasts
    Estimate(CommonArgs),
    /// Print full fringe scans, one row per analysis phase
    Fringes(CommonArgs),
}

fn fail(message: &str) -> ! {
    eprintln!("cavjar: {message}");
    std::process::exit(2);
}

fn main() {
    // Single-threaded kernels keep row-level parallelism deterministic
    // and stop the linear algebra from oversubscribing the cores.
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }

    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Visibility(a) => ("visibility", a),
        Cmd::Jarzynski(a) => ("jarzynski", a),
        Cmd::Estimate(a) => ("estimate", a),
        Cmd::Fringes(a) => ("fringes", a),
    };

    let settings = match Settings::from_args(args) {
        Ok(s) => s,
        Err(e) => fail(&e),
    };

    let table = match runner::run(command, &settings) {
        Ok(t) => t,
        Err(e) => fail(&e),
    };

    let rendered = match settings.format {
        OutputFormat::Csv => output::render_csv(&table),
        OutputFormat::Json => output::render_json(command, &settings.echo(), &table),
    };

    match &settings.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &rendered) {
                fail(&format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{rendered}"),
    }

    if !table.rows.is_empty() && table.n_errors == table.rows.len() {
        std::process::exit(3);
    }
}
