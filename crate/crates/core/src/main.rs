use clap::Parser;

fn main() {
    let args = harmconf::cli::Args::parse();
    std::process::exit(harmconf::cli::main_with_args(args));
}
