use std::process::ExitCode;

fn main() -> ExitCode {
    gvcp::cli::run()
}
