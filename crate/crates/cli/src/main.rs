use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hawkes_stein_cli::{run_config_file, RunOptions};

/// Run a Hawkes Stein-bound experiment described by a config file.
#[derive(Debug, Parser)]
#[command(name = "hawkes-stein", version)]
struct Cli {
    /// Experiment config file.
    config: PathBuf,

    /// Output directory, overriding `out_dir` from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Worker threads, overriding `threads` from the config.
    #[arg(long)]
    threads: Option<usize>,

    /// Also write the first N simulated paths of each horizon.
    #[arg(long, value_name = "N")]
    dump_paths: Option<usize>,
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
    if cli.threads == Some(0) {
        eprintln!("--threads must be at least 1");
        return ExitCode::from(1);
    }
    let options = RunOptions { threads: cli.threads, out_dir: cli.out_dir, dump_paths: cli.dump_paths };
    match run_config_file(&cli.config, &options) {
        Ok(summary) => {
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for f in &summary.files {
                println!("{}", summary.out_dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
