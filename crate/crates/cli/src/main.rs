use std::io;

fn main() {
    let stdout = io::stdout();
    let stderr = io::stderr();
    let code = arena_cli::run_from_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code.code());
}
