use clap::Parser;

fn main() {
    let cli = viewpoint::cli::Cli::parse();
    if let Err(e) = viewpoint::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
