use clap::Parser;

fn main() {
    let cli = liftbreg_cli::args::Cli::parse();
    std::process::exit(liftbreg_cli::run(cli));
}
