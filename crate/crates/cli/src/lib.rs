//! Library side of the `qmetro` command: scenario parsing, dispatch and
//! report assembly. The binary is a thin clap wrapper around [`run::run_file`].

pub mod config;
pub mod error;
pub mod run;
