use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = bia_sim::cli::run(std::env::args().skip(1));
    std::io::stdout()
        .write_all(&outcome.stdout)
        .expect("stdout");
    eprint!("{}", outcome.stderr);
    ExitCode::from(outcome.code as u8)
}
