//! Command-line front end of the traffic-steering simulator.

mod args;
mod commands;
mod manifest;
mod workers;

use clap::Parser;

fn main() -> anyhow::Result<()> {
    let cli = args::Cli::parse();
    commands::run(cli)
}
