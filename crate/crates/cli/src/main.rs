use clap::Parser;

fn main() {
    let cli = gesp_cli::Cli::parse();
    std::process::exit(gesp_cli::run(&cli));
}
