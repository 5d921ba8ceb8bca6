use clap::Parser;

use kerrtopo::cli::{configure_threads, run, Cli, CliError};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        let e = CliError::from(e);
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
    match run(cli) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let verb = if report.verified { "verified" } else { "wrote" };
            for o in &report.manifest.outputs {
                eprintln!("{verb} {} ({})", o.file, &o.sha256[..12]);
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
