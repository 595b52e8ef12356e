use clap::Parser;

fn main() {
    let cli = pile_kit::cli::Cli::parse();
    if let Err(e) = pile_kit::cli::configure_threads().and_then(|()| pile_kit::cli::run(cli)) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
