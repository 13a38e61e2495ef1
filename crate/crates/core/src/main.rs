use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dvlr::harness::{
    self, emit_report, load_experiments, pick_baseline, run_experiment, train_trial, write_spec, write_trace_csv,
    DataPair, ExperimentSpec,
};
use dvlr::search::{emit_search_report, run_stage, SearchPlan, Stage};
use dvlr::{Error, Result};

#[derive(Parser)]
#[command(name = "dvlr", version, about = "Dual variable learning-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of one experiment and update the result tables.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the config's base_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset root; defaults to the config's data_dir, then $DVLR_DATA_DIR.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Recompute results.csv and report.txt from the trials_*.csv files.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Experiment to compare against; defaults to the best single-rate one.
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Print one trial's learning-rate trace as CSV.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trial: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Run one search stage and write stage_<name>.csv.
    Search {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        stage: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_spec(config: &Path, seed: Option<u64>) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::from_config(&read_text(config)?)
        .map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    if let Some(seed) = seed {
        spec.base_seed = seed;
    }
    Ok(spec)
}

fn print_table(out: &Path) -> Result<()> {
    let path = out.join("report.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::Internal(format!("{}: {e}", path.display())))?;
    print!("{text}");
    Ok(())
}

/// Rewrites the tables from every experiment in `out`. Without an explicit
/// baseline the best single-rate experiment is used, if there is one.
fn refresh_tables(out: &Path, baseline: Option<String>, require_baseline: bool) -> Result<()> {
    let results = load_experiments(out)?;
    if results.is_empty() {
        return Err(Error::Config(format!("no trials_*.csv files in {}", out.display())));
    }
    let baseline = match baseline {
        Some(b) => Some(b),
        None if require_baseline => Some(pick_baseline(&results)?),
        None => pick_baseline(&results).ok(),
    };
    harness::emit_tables(&results, baseline.as_deref(), out)?;
    print_table(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            out,
            jobs,
            seed,
            data_dir,
        } => {
            let spec = load_spec(&config, seed)?;
            let data = DataPair::load(&spec, data_dir.as_deref())?;
            let result = run_experiment(&spec, &data, jobs)?;
            emit_report(std::slice::from_ref(&result), None, &out)?;
            write_spec(&out, &spec)?;
            refresh_tables(&out, None, false)
        }
        Command::Report { out, baseline } => refresh_tables(&out, baseline, true),
        Command::Trace {
            config,
            trial,
            seed,
            data_dir,
        } => {
            let spec = load_spec(&config, seed)?;
            if trial >= spec.trials {
                return Err(Error::Config(format!(
                    "trial {trial} is out of range for {} trials",
                    spec.trials
                )));
            }
            let data = DataPair::load(&spec, data_dir.as_deref())?;
            let trained = train_trial(&spec, &data, trial)?;
            write_trace_csv(io::stdout().lock(), &trained.result.trace)
        }
        Command::Search {
            plan,
            stage,
            out,
            jobs,
            data_dir,
        } => {
            let stage: Stage = stage.parse()?;
            let plan = SearchPlan::parse_for_stage(&read_text(&plan)?, Some(stage))
                .map_err(|e| Error::Config(format!("{}: {e}", plan.display())))?;
            let data = DataPair::load(&plan.base, data_dir.as_deref())?;
            let (result, experiments) = run_stage(&plan, &data, &out, jobs)?;
            emit_search_report(std::slice::from_ref(&result), &out)?;
            if stage == Stage::Finals {
                let dir = out.join("finals");
                let baseline = pick_baseline(&experiments).ok();
                emit_report(&experiments, baseline.as_deref(), &dir)?;
            }
            let mut stdout = io::stdout().lock();
            for e in result.ranked() {
                writeln!(stdout, "{:>8.3}  {}", e.test_avg, e.method).map_err(|e| Error::Internal(e.to_string()))?;
            }
            Ok(())
        }
    }
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
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(2),
    }
}
