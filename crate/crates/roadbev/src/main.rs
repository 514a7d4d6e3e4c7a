use std::process::ExitCode;

fn main() -> ExitCode {
    roadbev::cli::main_with_args(std::env::args_os())
}
