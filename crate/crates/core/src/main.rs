use std::process::ExitCode;

fn main() -> ExitCode {
    stratjoin::cli::main(std::env::args_os())
}
