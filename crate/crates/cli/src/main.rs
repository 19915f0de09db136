use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = semkge_cli::Cli::parse();
    if let Err(e) = semkge_cli::run(&cli) {
        eprintln!("error [{}]: {e}", e.category());
        std::process::exit(e.exit_code());
    }
}
