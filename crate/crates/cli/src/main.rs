use clap::Parser;

fn main() {
    let cli = nvpair_cli::Cli::parse();
    std::process::exit(nvpair_cli::dispatch(cli));
}
