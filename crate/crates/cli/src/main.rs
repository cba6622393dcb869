use std::process::ExitCode;

fn main() -> ExitCode {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let code = nmmhmm_cli::run_from(std::env::args_os(), &mut nmmhmm_cli::Io { out: &mut out, err: &mut err });
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
