use clap::Parser;

use bilayer_cli::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = execute(cli) {
        match serde_json::to_string(&err.report()) {
            Ok(json) => eprintln!("{json}"),
            Err(_) => eprintln!("{err}"),
        }
        std::process::exit(err.exit_code());
    }
}
