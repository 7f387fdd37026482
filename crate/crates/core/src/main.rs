use std::process::ExitCode;

use biharmonic_ieti::cli::Cli;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let outcome = match cli.execute() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &outcome.text),
        None => {
            print!("{}", outcome.text);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if outcome.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
