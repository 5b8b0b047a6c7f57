//! `gsfix`: fit, render, restore-in-the-loop reconstruction, benchmarks and
//! gradient checks from the command line.
//!
//! Every command prints its result on stdout and exits 0. Failures print
//! `{"error": {"kind": ..., "message": ...}}` on stderr and exit nonzero.

mod bench;
mod error;
mod fit;
mod fix;
mod inputs;
mod render;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsfix_core::raster::gradcheck::seeded_check;
use serde_json::json;

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "gsfix", version, about = "Sparse-view Gaussian splatting with restoration in the loop")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a scene to posed images.
    Fit(fit::FitArgs),
    /// Render a scene at given cameras or along a sampled trajectory.
    Render(render::RenderArgs),
    /// Run the iterative restoration-in-the-loop reconstruction.
    Fix(fix::FixArgs),
    /// Build and evaluate artifact/GT benchmarks.
    #[command(subcommand)]
    Bench(bench::BenchCommand),
    /// Compare analytic render gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    splats: usize,
    /// Square image resolution in pixels.
    #[arg(long, default_value_t = 32)]
    res: u32,
    #[arg(long, default_value_t = 1)]
    sh_degree: usize,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
}

pub enum Output {
    Json(serde_json::Value),
    Text(String),
}

fn gradcheck(args: GradcheckArgs) -> Result<Output, CliError> {
    if args.res == 0 || args.splats == 0 {
        return Err(CliError::Usage("--splats and --res must be positive".into()));
    }
    let report = seeded_check(args.seed, args.splats, args.res, args.sh_degree)?;
    let max = report.max_rel_error();
    let groups: serde_json::Map<_, _> = report
        .groups
        .iter()
        .map(|g| (g.group.name().to_string(), json!({ "max_rel_error": g.max_rel_error, "checked": g.checked })))
        .collect();
    println!("{}", json!({ "max_rel_error": max, "groups": groups }));
    if max < args.tol {
        Ok(Output::Text(String::new()))
    } else {
        Err(CliError::GradCheck(max, args.tol))
    }
}

fn run(cli: Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Fit(a) => fit::run(a).map(Output::Json),
        Command::Render(a) => render::run(a).map(Output::Json),
        Command::Fix(a) => fix::run(a).map(Output::Json),
        Command::Bench(c) => bench::run(c),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(Output::Json(v)) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("JSON values serialize"));
            ExitCode::SUCCESS
        }
        Ok(Output::Text(t)) => {
            print!("{t}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
