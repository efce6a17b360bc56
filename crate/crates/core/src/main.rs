use std::io;

fn main() {
    let code = seamcheck::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
