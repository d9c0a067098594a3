use clap::Parser;
use polemos_cli::{run, Cli};
use tracing_subscriber::EnvFilter;

fn main() {
    let cli = Cli::parse();
    let default_level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if let Err(err) = run(cli, &mut out) {
        eprintln!("{}", err.json_line());
        std::process::exit(err.exit_code());
    }
}
