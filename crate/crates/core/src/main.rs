use clap::Parser;

fn main() {
    env_logger::init();
    std::process::exit(subharm::cli::run(subharm::cli::Args::parse()));
}
