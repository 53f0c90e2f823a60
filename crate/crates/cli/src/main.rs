//! `hci`: generate, fit, index, infer, forecast and experiment from the shell.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use hci_core::HciError;

use args::{Cli, Command};
use commands::UsageError;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn version_text() -> String {
    format!(
        "hci {}\nsnapshot schema {}\nmodel schema {}\nindex schema {}",
        env!("CARGO_PKG_VERSION"),
        hci_core::SNAPSHOT_SCHEMA_VERSION,
        hci_core::MODEL_SCHEMA_VERSION,
        hci_core::INDEX_SCHEMA_VERSION
    )
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<HciError>() {
            return match e {
                HciError::Config(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_DATA;
        }
    }
    EXIT_INTERNAL
}

fn run(command: &Command) -> anyhow::Result<()> {
    let staged = match command {
        Command::Generate(a) => commands::generate(a)?,
        Command::Fit(a) => commands::fit(a)?,
        Command::Index(a) => commands::index(a)?,
        Command::Subindex(a) => commands::subindex(a)?,
        Command::Ci(a) => commands::ci(a)?,
        Command::Forecast(a) => commands::forecast(a)?,
        Command::Scenario(a) => commands::scenario(a)?,
        Command::Splice(a) => commands::splice(a)?,
        Command::Compare(a) => commands::compare(a)?,
    };
    let manifest = staged.commit(command)?;
    log::info!("{} finished; manifest at {}", command.name(), manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    if cli.version {
        println!("{}", version_text());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        let _ = Cli::command().print_help();
        return ExitCode::from(EXIT_USAGE);
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    match std::panic::catch_unwind(|| run(&command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
