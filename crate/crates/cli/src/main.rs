use std::process::ExitCode;

use clap::Parser;
use viewrobust_cli::args::Cli;

/// Worker-thread count override.
const THREADS_VAR: &str = "VIEWROBUST_THREADS";

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: cannot set up {n} threads: {e}");
                    return ExitCode::from(1);
                }
            }
            _ => {
                eprintln!("config error: {THREADS_VAR} must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match viewrobust_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
