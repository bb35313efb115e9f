use clap::Parser;

use icufuse_cli::{args::Cli, execute};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = execute(cli) {
        eprintln!("{err}");
        std::process::exit(err.exit_code());
    }
}
