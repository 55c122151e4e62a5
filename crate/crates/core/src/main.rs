use clap::Parser;
use hardsphere::cli::{execute, CliConfig};

fn main() {
    let cfg = CliConfig::parse();
    std::process::exit(execute(&cfg));
}
