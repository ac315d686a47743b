use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    if let Err(e) = stratlearn::cli::configure_threads() {
        let _ = writeln!(std::io::stderr(), "error: {e}");
        return ExitCode::from(1);
    }
    let args: Vec<String> = std::env::args().collect();
    let code = stratlearn::cli::run(&args, &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}
