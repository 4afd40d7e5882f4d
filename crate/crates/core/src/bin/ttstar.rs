use clap::Parser;
use ttstar_core::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    std::process::exit(run(&cli, &mut out));
}
