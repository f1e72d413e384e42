use clap::Parser;
use pareto_ocp::cli::{run, Cli};

fn main() {
    std::process::exit(run(&Cli::parse()));
}
