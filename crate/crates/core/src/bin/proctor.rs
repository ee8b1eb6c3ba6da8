use clap::Parser;
use proctor_core::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
