use std::process::ExitCode;

fn main() -> ExitCode {
    match qmaxwell::cli::main_with_args(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmaxwell: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
