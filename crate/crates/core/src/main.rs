use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hudtrust::hud::Policy;
use hudtrust::pipeline::{self, PipelineError, RunConfig, ScenarioSource};

#[derive(Parser)]
#[command(
    name = "hudtrust",
    version,
    about = "AV HUD scenario simulation and GSR analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario and write state, cue, hazard and motion logs.
    Simulate(RunArgs),
    /// Synthesise a cohort's GSR recordings and write the feature table.
    Cohort(RunArgs),
    /// Run the statistics on a feature table and optional ratings.
    Analyze(AnalyzeArgs),
    /// simulate, cohort and analyze in one go.
    Report(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// `bundled` for the bundled scenario, or a scenario file.
    #[arg(long, default_value = "bundled")]
    scenario: String,
    #[arg(long, default_value = "OMN")]
    policy: Policy,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 15)]
    n_omn: usize,
    #[arg(long, default_value_t = 15)]
    n_sel: usize,
    /// TOML file overriding module parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write each subject's raw signal.
    #[arg(long)]
    signals: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl From<RunArgs> for RunConfig {
    fn from(a: RunArgs) -> Self {
        RunConfig {
            scenario: ScenarioSource::parse(&a.scenario),
            policy: a.policy,
            seed: a.seed,
            n_omn: a.n_omn,
            n_sel: a.n_sel,
            out: a.out,
            config: a.config,
            write_signals: a.signals,
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Simulate(a) => {
            let out = pipeline::cmd_simulate(&a.into())?;
            let s = &out.log.summary;
            println!(
                "{} events, {} collisions, {:.0} m driven; logs in {}",
                out.log.events.len(),
                s.collisions,
                s.distance_m,
                out.files[0]
                    .parent()
                    .map_or_else(String::new, |p| p.display().to_string())
            );
        }
        Command::Cohort(a) => {
            let cfg: RunConfig = a.into();
            let rows = pipeline::cmd_cohort(&cfg)?;
            println!(
                "{} feature rows written to {}",
                rows.len(),
                cfg.out.join("features.csv").display()
            );
        }
        Command::Analyze(a) => {
            let report = pipeline::cmd_analyze(&a.features, a.ratings.as_deref(), &a.out)?;
            print!("{}", report.to_text());
        }
        Command::Report(a) => {
            let report = pipeline::cmd_report(&a.into())?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
