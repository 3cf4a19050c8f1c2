use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(bboxlab::cli::run(std::env::args_os()) as u8)
}
