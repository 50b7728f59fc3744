use std::process::ExitCode;

fn main() -> ExitCode {
    evtrack_cli::main_with(std::env::args_os())
}
