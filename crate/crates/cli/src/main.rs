mod args;
mod commands;
mod error;
mod settings;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&cli.log).unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Replay(a) => commands::replay(a),
        Command::Eval(a) => commands::eval(a),
        Command::Validate(a) => commands::validate(a),
        Command::Trace(a) => commands::trace(a),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
