use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fuselab::cli::main_with_args())
}
