use clap::Parser;

fn main() {
    let cli = polyplan_cli::Cli::parse();
    if let Err(failure) = polyplan_cli::run(cli) {
        eprintln!("error: {failure}");
        std::process::exit(failure.code);
    }
}
