use std::io::Write;
use std::panic;
use std::process::ExitCode;

use clap::Parser;
use fivebrane_cli::{execute, Cli, Format, Status};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match panic::catch_unwind(|| execute(&cli)) {
        Ok(r) => r,
        Err(_) => {
            eprintln!("internal error: invariant violated");
            return ExitCode::from(Status::Internal.code() as u8);
        }
    };
    let mut out = std::io::stdout().lock();
    if result.status >= Status::InputError {
        eprint!("{}", result.human);
        if cli.format != Format::Human {
            let _ = out.write_all(result.machine_text().as_bytes());
        }
    } else {
        let _ = out.write_all(result.render(cli.format).as_bytes());
    }
    ExitCode::from(result.status.code() as u8)
}
