use std::process::ExitCode;

fn main() -> ExitCode {
    ginar::cli::main_with_args(std::env::args_os())
}
