use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use renvnet::commands::{run, Command, RunOptions};
use renvnet::randomization::RerouteMode;
use renvnet::spec::parse_spec;

/// Product-form analysis of Jackson networks under randomized rerouting.
#[derive(Parser)]
#[command(name = "renvnet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Traffic solution, normalizing constants, and stationary pmf samples.
    Analyze(CommonArgs),
    /// Control pair, modified routing matrix, and balance residual.
    Modify(CommonArgs),
    /// Reduced generator, its stationary vector, and the coupled residual.
    Env(CommonArgs),
    /// Event-driven simulation with total-variation comparisons.
    Simulate(CommonArgs),
    /// Every applicable residual suite; exit 0 iff all pass.
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Spec file (JSON, schema renvnet-spec/1).
    spec: PathBuf,
    /// Write the report as JSON to this path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation event-count override.
    #[arg(long)]
    events: Option<usize>,
    /// Threshold for coupled-balance residuals.
    #[arg(long, default_value_t = 1e-8)]
    tol_balance: f64,
    /// Threshold for solve and uncoupled balance residuals.
    #[arg(long, default_value_t = 1e-10)]
    tol_solve: f64,
    /// Rerouting mode override.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Skipping,
    Reflection,
}

impl From<ModeArg> for RerouteMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Skipping => RerouteMode::Skipping,
            ModeArg::Reflection => RerouteMode::Reflection,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        CliCommand::Analyze(args) => (Command::Analyze, args),
        CliCommand::Modify(args) => (Command::Modify, args),
        CliCommand::Env(args) => (Command::Env, args),
        CliCommand::Simulate(args) => (Command::Simulate, args),
        CliCommand::Verify(args) => (Command::Verify, args),
    };

    let options = RunOptions {
        tol_balance: args.tol_balance,
        tol_solve: args.tol_solve,
        seed: args.seed,
        events: args.events,
        mode: args.mode.map(RerouteMode::from),
    };

    let result = parse_spec(&args.spec).and_then(|doc| run(command, &doc, &options));
    let report = match result {
        Ok(report) => report,
        Err(err) => {
            let payload = serde_json::json!({
                "error": {"kind": err.kind(), "message": err.to_string()}
            });
            eprintln!("{payload}");
            return ExitCode::from(1);
        }
    };

    print!("{}", report.render());
    if let Some(path) = &args.out {
        if let Err(err) = std::fs::write(path, report.to_json()) {
            let payload = serde_json::json!({
                "error": {"kind": "io", "message": err.to_string()}
            });
            eprintln!("{payload}");
            return ExitCode::from(1);
        }
    }
    if report.all_residuals_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
