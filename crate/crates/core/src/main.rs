use std::io::Write;

fn main() {
    let out = stokeskit::cli::run(std::env::args_os());
    if !out.stdout.is_empty() {
        let _ = writeln!(std::io::stdout(), "{}", out.stdout);
    }
    let _ = write!(std::io::stderr(), "{}", out.stderr);
    std::process::exit(out.code);
}
