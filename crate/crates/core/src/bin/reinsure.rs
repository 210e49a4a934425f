use clap::Parser;
use optimal_reinsurance::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(outcome) => outcome.code(),
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(code);
}
