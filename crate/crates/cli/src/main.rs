use clap::Parser;

fn main() {
    let cli = gcds_cli::Cli::parse();
    std::process::exit(gcds_cli::run(&cli));
}
