use std::process::ExitCode;

fn main() -> ExitCode {
    cl4cvr::cli::main_with_args(std::env::args_os())
}
