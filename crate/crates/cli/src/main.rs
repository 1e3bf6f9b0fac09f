use std::process::ExitCode;

fn main() -> ExitCode {
    fm_cli::cli::main_with_args(std::env::args_os())
}
