use clap::Parser;
use lcsd_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli.command) {
        eprintln!("lcsd: {e}");
        std::process::exit(e.exit_code());
    }
}
