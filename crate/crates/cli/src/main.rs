mod config;
mod output;
mod run;

use std::process::ExitCode;

use config::ExperimentConfig;

fn main() -> ExitCode {
    let matches = match config::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let Some((name, sub)) = matches.subcommand() else {
        eprintln!("error: a subcommand is required");
        return ExitCode::from(1);
    };
    let (cfg, dry_run) = match ExperimentConfig::from_matches(name, sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if dry_run {
        print!("{}", cfg.canonical());
        return ExitCode::SUCCESS;
    }
    let threads = cfg.usize("threads").unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {threads} threads: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run::run_experiment(&cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
