use clap::Parser;
use walkguard_cli::{run, Cli};

fn main() {
    // Logging is fixed at warnings; the tool reads no environment variables.
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .init();
    let code = match run(Cli::parse()) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    };
    std::process::exit(code);
}
