//! `uqseg`: score segmentation uncertainty from sample stacks, reject the
//! most uncertain images and report retention curves.
//!
//! Exit codes: 0 success, 1 some images failed and were skipped, 2 usage or
//! configuration error.

mod args;
mod commands;
mod pipeline;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command, TtaCommand};

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some per-image work failed; the rest was written.
    Partial,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Metrics(args) => commands::metrics::run(&args),
        Command::Filter(args) => commands::filter::run(&args),
        Command::Curve(args) => commands::curve::run(&args),
        Command::Tta(TtaCommand::Emit(args)) => commands::tta::emit(&args),
        Command::Tta(TtaCommand::Collect(args)) => commands::tta::collect(&args),
        Command::Synth(args) => commands::synth::run(&args),
        Command::Render(args) => commands::render::run(&args),
    };

    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
