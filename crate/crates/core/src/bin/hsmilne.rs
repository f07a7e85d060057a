//! `hsmilne` command-line entry point; see [`hsmilne::cli_harness`].

fn main() {
    let code = hsmilne::cli_harness::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
