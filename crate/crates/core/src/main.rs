use clap::Parser;

use corridor_cbf::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
