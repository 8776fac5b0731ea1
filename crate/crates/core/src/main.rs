use clap::Parser;

use softrank_gbm::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
