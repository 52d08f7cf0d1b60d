mod args;
mod commands;
mod output;

use anyhow::Context;
use clap::Parser;

use crate::args::{Cli, Command};

fn run(command: &Command) -> anyhow::Result<()> {
    match command {
        Command::Fit(a) => commands::fit(a).map(|_| ()),
        Command::Compress(a) => commands::compress(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Pipeline(a) => commands::pipeline(a),
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building the worker pool")?
            .install(|| run(&cli.command)),
        None => run(&cli.command),
    }
}
