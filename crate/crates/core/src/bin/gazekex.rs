use std::process::ExitCode;

fn main() -> ExitCode {
    gazekex::cli::main_from(std::env::args_os())
}
