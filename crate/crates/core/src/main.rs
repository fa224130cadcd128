use clap::Parser;

fn main() {
    std::process::exit(safelearn::cli::run(safelearn::cli::Cli::parse()));
}
