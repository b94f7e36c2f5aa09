use clap::Parser;

fn main() {
    let cli = homdyn_cli::Cli::parse();
    std::process::exit(homdyn_cli::main_with(cli));
}
