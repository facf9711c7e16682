//! Input format, command dispatch and report rendering for the `fivebrane` binary.

pub mod document;
pub mod run;

pub use document::{parse, parse_bytes, Diagnostic, InputDocument};
pub use run::{execute, Cli, CommandResult, Format, Status};
