use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clickbandit::exp::{self, ArmModel, ExperimentConfig};
use clickbandit::Result;

/// Strategic click-bandit simulations.
#[derive(Parser)]
#[command(name = "clickbandit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment (paper-fig2, paper-fig3).
    #[arg(long)]
    preset: Option<String>,
    /// Override a config key, e.g. `--set instance.horizon=10000`.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (experiment.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs (experiment.runs).
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes at a fixed strategy profile.
    Simulate(Common),
    /// Let the arms adapt by gradient ascent over epochs.
    Equilibrate(Common),
    /// Certify a profile as an ε-Nash equilibrium on a strategy grid.
    CertifyNe {
        #[command(flatten)]
        common: Common,
        /// Search for an equilibrium by iterated best response first.
        #[arg(long)]
        ibr: bool,
    },
    /// Check the regularity assumptions of the utility on a grid.
    ValidateUtility(Common),
    /// Regret of fixed profiles over a grid of horizons and offsets.
    Sweep(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut overrides = common
        .set
        .iter()
        .map(|s| exp::parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(out) = &common.out {
        overrides.push(("output.dir".into(), out.display().to_string()));
    }
    if let Some(seed) = common.seed {
        overrides.push(("experiment.seed".into(), seed.to_string()));
    }
    if let Some(runs) = common.runs {
        overrides.push(("experiment.runs".into(), runs.to_string()));
    }
    exp::load_config(common.preset.as_deref(), common.config.as_deref(), &overrides)
}

fn print_report(entries: &[(String, String)]) {
    for (k, v) in entries {
        println!("{k}={v}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let mut config = load(&common)?;
            config.arm_model = ArmModel::Fixed;
            let out = exp::run_experiment(&config)?;
            print_report(&out.report);
        }
        Command::Equilibrate(common) => {
            let mut config = load(&common)?;
            config.arm_model = ArmModel::Gradient;
            let out = exp::run_experiment(&config)?;
            print_report(&out.report);
        }
        Command::CertifyNe { common, ibr } => {
            let mut config = load(&common)?;
            config.arm_model = ArmModel::Fixed;
            let out = exp::certify(&config, ibr)?;
            print!("{}", out.files.iter().find(|f| f.name == "report.txt").map_or("", |f| f.contents.as_str()));
        }
        Command::ValidateUtility(common) => {
            let config = load(&common)?;
            print!("{}", exp::validate_utility(&config)?);
        }
        Command::Sweep(common) => {
            let config = load(&common)?;
            let (_, files) = exp::sweep(&config)?;
            print!("{}", files.iter().find(|f| f.name == "report.txt").map_or("", |f| f.contents.as_str()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
