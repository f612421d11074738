use clap::Parser;

fn main() {
    std::process::exit(qumode_cli::run_cli(qumode_cli::Cli::parse()));
}
