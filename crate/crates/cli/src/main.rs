use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(kktcheck_cli::run(std::env::args_os()) as u8)
}
