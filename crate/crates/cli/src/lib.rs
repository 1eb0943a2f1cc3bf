//! Command-line front end and HTTP service over `wikitables-core`.

pub mod args;
pub mod commands;
pub mod config;
pub mod progress;
pub mod server;

use std::ffi::OsString;

use clap::Parser;

pub use commands::CliError;

/// Parse `argv`, run the subcommand and return the process exit code:
/// 0 on success, 1 on operational errors, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
