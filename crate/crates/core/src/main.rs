use std::process::ExitCode;

fn main() -> ExitCode {
    match egovqa_core::cli::main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
