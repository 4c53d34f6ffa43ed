//! `augforge` command-line front end. Exit status: 0 on success, 1 on
//! invalid flags or input content, 2 on file access failures. Results go
//! to stdout, diagnostics to stderr.

mod cli;
mod commands;
mod error;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::{Cli, Command};
use crate::commands::{augment, eval, fixture, latent, report, search, strategy, CmdResult, Ctx};
use crate::error::CliError;

fn dispatch(ctx: &Ctx, command: &Command) -> CmdResult {
    match command {
        Command::Augment(a) => augment::augment(ctx, a),
        Command::GenerateK(a) => augment::generate_k(ctx, a),
        Command::Search(a) => search::search(ctx, a),
        Command::LatentTrain(a) => latent::train(ctx, a),
        Command::LatentScore(a) => latent::score(ctx, a),
        Command::Plan(a) => strategy::plan(ctx, a),
        Command::Split(a) => strategy::split(ctx, a),
        Command::Folds(a) => strategy::folds(ctx, a),
        Command::EvalDet(a) => eval::eval_det(ctx, a),
        Command::EvalSeg(a) => eval::eval_seg(ctx, a),
        Command::Report(a) => report::report(ctx, a),
        Command::Compare(a) => report::compare(ctx, a),
        Command::Fixture(a) => fixture::fixture(ctx, a),
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    if cli.jobs == Some(0) {
        return Err(CliError::flag("jobs", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::flag("jobs", e))?;
    let ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir.clone(),
    };
    let out = pool.install(|| dispatch(&ctx, &cli.command))?;
    Ok(out.render(cli.format))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
