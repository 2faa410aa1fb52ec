use std::process::ExitCode;

fn main() -> ExitCode {
    labelforge::cli::main()
}
