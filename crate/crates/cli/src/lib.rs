//! Library side of the `sqzsim` command-line front end: scenario
//! configuration, the four subcommand implementations, and CSV output.

pub mod commands;
pub mod config;
pub mod output;

use std::sync::OnceLock;

fn verbosity() -> u8 {
    static LEVEL: OnceLock<u8> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("SQZSIM_LOG").as_deref() {
        Ok("quiet") => 0,
        Ok("debug") => 2,
        _ => 1,
    })
}

pub fn log_info(msg: &str) {
    if verbosity() >= 1 {
        eprintln!("sqzsim: {msg}");
    }
}

pub fn log_debug(msg: &str) {
    if verbosity() >= 2 {
        eprintln!("sqzsim[debug]: {msg}");
    }
}
