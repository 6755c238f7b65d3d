use clap::Parser;

fn main() {
    let args = match blockid_cli::args::Cli::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    std::process::exit(blockid_cli::run(args));
}
