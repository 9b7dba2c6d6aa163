use clap::Parser;

fn main() {
    let cli = cracktip::cli::Cli::parse();
    std::process::exit(cracktip::cli::execute(&cli));
}
