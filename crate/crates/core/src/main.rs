use std::process::ExitCode;

fn main() -> ExitCode {
    dishrec::cli::main_from_args(std::env::args_os())
}
