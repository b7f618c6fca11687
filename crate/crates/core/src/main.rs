use std::process::ExitCode;

fn main() -> ExitCode {
    pulseflip::cli::run()
}
