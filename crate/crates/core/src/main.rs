use std::process::ExitCode;

use clap::Parser;
use ld_lattice::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    if let Some(n) = std::env::var("LD_LATTICE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // the pool can only be configured once; a failure leaves the default in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
