use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hif_cli::{
    cmd_bench, cmd_eval, cmd_generate, cmd_run, exit_code, CliError, Options, EXIT_USAGE,
};
use hif_core::evaluation::ReportFormat;

#[derive(Parser)]
#[command(
    name = "hif",
    version,
    about = "Remove dynamic objects from LiDAR maps with height interval filtering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the map and write the cleaned cloud, the map and timings.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Like `run`, then score the result against the labels.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the integration loop over repeated passes.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Passes run first and left out of the statistics.
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the configured synthetic scene as a KITTI-style sequence.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Disable low-height preservation.
    #[arg(long)]
    no_lhp: bool,
    /// Seed for synthetic scenes (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Fuse pillars on all cores.
    #[arg(long)]
    parallel: bool,
    /// Classify each scan against the map right after integrating it,
    /// instead of against the final map.
    #[arg(long)]
    online: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Common {
    fn options(&self) -> Options {
        Options {
            no_lhp: self.no_lhp,
            seed: self.seed,
            format: match self.format {
                Format::Csv => ReportFormat::Csv,
                Format::Json => ReportFormat::Json,
            },
            parallel: self.parallel.then_some(true),
            online: self.online.then_some(true),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { common, out } => {
            let summary = cmd_run(&common.config, &out, &common.options())?;
            println!("{summary}");
        }
        Command::Eval { common, out } => {
            let summary = cmd_eval(&common.config, &out, &common.options())?;
            println!("{summary}");
        }
        Command::Bench {
            common,
            reps,
            warmup,
            out,
        } => {
            let summary = cmd_bench(&common.config, reps, warmup, &common.options())?;
            let table = summary.to_csv();
            print!("{table}");
            if let Some(path) = out {
                std::fs::write(&path, table).map_err(|e| hif_core::HifError::io(&path, e))?;
            }
        }
        Command::Generate { common, out } => {
            let path = cmd_generate(&common.config, &out, &common.options())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
