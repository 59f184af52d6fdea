use std::process::ExitCode;

fn main() -> ExitCode {
    supradiff::cli::main_with_args(std::env::args_os())
}
