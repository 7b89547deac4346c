use clap::Parser;
use unitrank::Cli;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = unitrank::run(Cli::parse(), &mut stdout) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
